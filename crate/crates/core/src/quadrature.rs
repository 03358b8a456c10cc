//! Point sets, cubes and tensorized quadrature rules.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A set of points in `R^d`, stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    dim: usize,
    coords: Vec<f64>,
}

impl Points {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::arg("point dimension must be positive"));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::arg(format!(
                "{} coordinates do not split into points of dimension {dim}",
                coords.len()
            )));
        }
        Ok(Points { dim, coords })
    }

    pub fn empty(dim: usize) -> Self {
        Points {
            dim,
            coords: Vec::new(),
        }
    }

    /// One-dimensional points from scalars.
    pub fn from_scalars(xs: &[f64]) -> Self {
        Points {
            dim: 1,
            coords: xs.to_vec(),
        }
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::arg(format!(
                    "row of length {} in a point set of dimension {dim}",
                    row.len()
                )));
            }
            coords.extend_from_slice(row);
        }
        Ok(Points { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }
}

/// The cube `[lo, hi]^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
    pub dim: usize,
}

impl Domain {
    pub fn new(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::arg(format!("empty or non-finite interval [{lo}, {hi}]")));
        }
        if dim == 0 {
            return Err(Error::arg("dimension must be positive"));
        }
        Ok(Domain { lo, hi, dim })
    }

    /// `[0, 1]^d`, the index set of the mixture process.
    pub fn unit(dim: usize) -> Self {
        Domain { lo: 0.0, hi: 1.0, dim }
    }

    /// The default design set `[0.1, 0.9]^d`.
    pub fn interior(dim: usize) -> Self {
        Domain { lo: 0.1, hi: 0.9, dim }
    }

    pub fn volume(&self) -> f64 {
        (self.hi - self.lo).powi(self.dim as i32)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim && x.iter().all(|&v| v >= self.lo && v <= self.hi)
    }

    /// Whether the cube sits strictly inside `(0, 1)^d`.
    pub fn is_strict_interior(&self) -> bool {
        self.lo > 0.0 && self.hi < 1.0
    }

    /// Default number of probe points per axis: 401 in one dimension, 101
    /// otherwise, capped so that the total stays near `401^1`/`101^2` sizes.
    pub fn default_resolution(&self) -> usize {
        match self.dim {
            1 => 401,
            2 => 101,
            3 => 21,
            _ => 7,
        }
    }

    /// Uniform tensor grid with `per_axis` points per axis, endpoints included.
    pub fn grid(&self, per_axis: usize) -> Points {
        let axis = linspace(self.lo, self.hi, per_axis);
        tensor_points(&vec![axis; self.dim])
    }

    pub fn probe_grid(&self) -> Points {
        self.grid(self.default_resolution())
    }

    /// Trapezoidal rule on the uniform tensor grid.
    pub fn trapezoid(&self, per_axis: usize) -> QuadratureRule {
        let per_axis = per_axis.max(2);
        let axis = linspace(self.lo, self.hi, per_axis);
        let h = (self.hi - self.lo) / (per_axis - 1) as f64;
        let weights: Vec<f64> = (0..per_axis)
            .map(|i| if i == 0 || i + 1 == per_axis { h / 2.0 } else { h })
            .collect();
        tensor_rule(&vec![(axis, weights); self.dim])
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![(lo + hi) / 2.0],
        _ => {
            let h = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i + 1 == n { hi } else { lo + h * i as f64 })
                .collect()
        }
    }
}

fn tensor_points(axes: &[Vec<f64>]) -> Points {
    let dim = axes.len();
    let total: usize = axes.iter().map(Vec::len).product();
    let mut coords = Vec::with_capacity(total * dim);
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        for (j, &i) in idx.iter().enumerate() {
            coords.push(axes[j][i]);
        }
        for j in (0..dim).rev() {
            idx[j] += 1;
            if idx[j] < axes[j].len() {
                break;
            }
            idx[j] = 0;
        }
    }
    Points { dim, coords }
}

/// Nodes and weights of a quadrature rule in `R^d`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Points,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn tensor_rule(axes: &[(Vec<f64>, Vec<f64>)]) -> QuadratureRule {
    let nodes = tensor_points(&axes.iter().map(|(x, _)| x.clone()).collect::<Vec<_>>());
    let weights = tensor_points(&axes.iter().map(|(_, w)| w.clone()).collect::<Vec<_>>())
        .iter()
        .map(|w| w.iter().product())
        .collect();
    QuadratureRule { nodes, weights }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi's initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Cached 64-node rule.
pub fn gauss_legendre_64() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(64))
}

/// Composite 64-node Gauss–Legendre rule on `[lo, hi]` with `panels` equal panels.
pub fn composite_legendre(lo: f64, hi: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre_64();
    let panels = panels.max(1);
    let width = (hi - lo) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * x.len());
    let mut weights = Vec::with_capacity(panels * x.len());
    for p in 0..panels {
        let a = lo + width * p as f64;
        let half = width / 2.0;
        for (xi, wi) in x.iter().zip(w) {
            nodes.push(a + half * (xi + 1.0));
            weights.push(half * wi);
        }
    }
    (nodes, weights)
}

/// Tensorized composite Gauss–Legendre rule on the cube `center + [-radius, radius]^d`.
pub fn legendre_cube(center: &[f64], radius: f64, panels: usize) -> QuadratureRule {
    let axes: Vec<_> = center
        .iter()
        .map(|&c| composite_legendre(c - radius, c + radius, panels))
        .collect();
    tensor_rule(&axes)
}
