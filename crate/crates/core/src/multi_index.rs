//! Multi-indices `k ∈ N_0^d` and the grid enumeration `{1, …, m}^d`.
//!
//! Grid indices are enumerated row-major with the last axis varying fastest.
//! The order is part of the public contract: mixture weights are stored in it.

/// A multi-index over `d` axes.
pub type MultiIndex = Vec<usize>;

/// `k. = k_1 + … + k_d`.
pub fn total(k: &[usize]) -> usize {
    k.iter().sum()
}

/// `k! = k_1! ⋯ k_d!` as a float.
pub fn factorial(k: &[usize]) -> f64 {
    k.iter().map(|&ki| factorial_scalar(ki)).product()
}

pub(crate) fn factorial_scalar(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// `x^k = ∏ x_j^{k_j}`.
pub fn power(x: &[f64], k: &[usize]) -> f64 {
    x.iter().zip(k).map(|(&xi, &ki)| xi.powi(ki as i32)).product()
}

/// All multi-indices in `N_0^d` with `k. == order`, in lexicographic order
/// (first axis most significant, descending).
pub fn of_total(dim: usize, order: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut current = vec![0; dim];
    fill(&mut out, &mut current, 0, order);
    out
}

fn fill(out: &mut Vec<MultiIndex>, current: &mut [usize], axis: usize, remaining: usize) {
    if axis + 1 == current.len() {
        current[axis] = remaining;
        out.push(current.to_vec());
        return;
    }
    for v in (0..=remaining).rev() {
        current[axis] = v;
        fill(out, current, axis + 1, remaining - v);
    }
}

/// All multi-indices with `k. <= order`, grouped by increasing total order.
pub fn up_to_total(dim: usize, order: usize) -> Vec<MultiIndex> {
    (0..=order).flat_map(|j| of_total(dim, j)).collect()
}

/// Number of grid points `m^d`, or `None` on overflow.
pub fn grid_len(m: usize, dim: usize) -> Option<usize> {
    let mut n: usize = 1;
    for _ in 0..dim {
        n = n.checked_mul(m)?;
    }
    Some(n)
}

/// Decodes the flat position of a grid index `k ∈ {1, …, m}^d` (row-major,
/// last axis fastest) into `out`.
pub fn grid_index(flat: usize, m: usize, out: &mut [usize]) {
    let mut rest = flat;
    for slot in out.iter_mut().rev() {
        *slot = rest % m + 1;
        rest /= m;
    }
}

/// Flat position of `k ∈ {1, …, m}^d`.
pub fn grid_position(k: &[usize], m: usize) -> usize {
    k.iter().fold(0, |acc, &ki| acc * m + (ki - 1))
}

/// Iterator over the centers `k/m` of the grid `{1, …, m}^d`, in storage order.
pub fn grid_centers(m: usize, dim: usize) -> impl Iterator<Item = Vec<f64>> {
    let len = grid_len(m, dim).unwrap_or(0);
    let mut k = vec![0; dim];
    (0..len).map(move |flat| {
        grid_index(flat, m, &mut k);
        k.iter().map(|&ki| ki as f64 / m as f64).collect()
    })
}

/// Whether every component of `l` is at most the matching component of `n`.
pub(crate) fn dominated(l: &[usize], n: &[usize]) -> bool {
    l.iter().zip(n).all(|(a, b)| a <= b)
}

/// Product of binomial coefficients `∏ C(n_j, l_j)`.
pub(crate) fn binomial(n: &[usize], l: &[usize]) -> f64 {
    n.iter()
        .zip(l)
        .map(|(&nj, &lj)| factorial_scalar(nj) / (factorial_scalar(lj) * factorial_scalar(nj - lj)))
        .product()
}
