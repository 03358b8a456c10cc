//! The location-scale mixture process
//!
//! ```text
//! W(x) = Σ_{k ∈ {1..M}^d} Z_k M^{-d/2} Σ^{-d} p((x - k/M) / Σ),   x ∈ [0,1]^d
//! ```
//!
//! with a zeta-type law on the grid size `M`, `Σ^d` inverse gamma, and iid
//! standard normal weights `Z_k`. Conditionally on `(M, Σ) = (m, σ)` the process
//! is Gaussian; this module also provides its covariance and the norm of its
//! reproducing kernel Hilbert space.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::multi_index;
use crate::quadrature::{Domain, Points};

/// Largest admissible number of basis functions `m^d`.
pub const BASIS_BUDGET: usize = 20_000;

/// One realization `(m, σ, z)` of the process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureFunction {
    m: usize,
    sigma: f64,
    dim: usize,
    weights: Vec<f64>,
}

impl MixtureFunction {
    pub fn new(m: usize, sigma: f64, dim: usize, weights: Vec<f64>) -> Result<Self> {
        if m == 0 || dim == 0 {
            return Err(Error::arg("grid size and dimension must be positive"));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::arg(format!(
                "bandwidth must be positive and finite, got {sigma}"
            )));
        }
        let expected = multi_index::grid_len(m, dim).ok_or_else(|| Error::arg("grid size overflows"))?;
        if weights.len() != expected {
            return Err(Error::arg(format!(
                "expected {expected} weights for m = {m}, d = {dim}, got {}",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::arg("weights must be finite"));
        }
        Ok(MixtureFunction { m, sigma, dim, weights })
    }

    pub fn zero(m: usize, sigma: f64, dim: usize) -> Result<Self> {
        let len = multi_index::grid_len(m, dim).ok_or_else(|| Error::arg("grid size overflows"))?;
        Self::new(m, sigma, dim, vec![0.0; len])
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eval(&self, kernel: &Kernel, x: &[f64]) -> f64 {
        eval_mixture(self, kernel, x)
    }
}

/// Column scale `m^{-d/2} σ^{-d}` of the basis.
pub fn basis_scale(m: usize, sigma: f64, dim: usize) -> f64 {
    (m as f64).powf(-(dim as f64) / 2.0) * sigma.powi(-(dim as i32))
}

/// Evaluates `Σ_k z_k m^{-d/2} σ^{-d} p((x - k/m)/σ)`.
///
/// Gaussian terms far in the tail underflow to zero and drop out.
pub fn eval_mixture(f: &MixtureFunction, kernel: &Kernel, x: &[f64]) -> f64 {
    let scale = basis_scale(f.m, f.sigma, f.dim);
    let inv_sigma = 1.0 / f.sigma;
    let m = f.m as f64;
    let mut k = vec![0usize; f.dim];
    let mut center = vec![0.0; f.dim];
    let mut acc = 0.0;
    for (flat, &z) in f.weights.iter().enumerate() {
        if z == 0.0 {
            continue;
        }
        multi_index::grid_index(flat, f.m, &mut k);
        for (c, &kj) in center.iter_mut().zip(&k) {
            *c = kj as f64 / m;
        }
        acc += z * kernel.scaled_value(x, &center, inv_sigma);
    }
    acc * scale
}

/// The `n × m^d` matrix of basis functions evaluated at a set of points.
#[derive(Debug, Clone)]
pub struct BasisMatrix {
    pub m: usize,
    pub sigma: f64,
    pub matrix: DMatrix<f64>,
}

impl BasisMatrix {
    /// `Φ z`.
    pub fn apply(&self, z: &[f64]) -> DVector<f64> {
        &self.matrix * DVector::from_column_slice(z)
    }

    pub fn columns(&self) -> usize {
        self.matrix.ncols()
    }
}

pub(crate) fn check_budget(m: usize, dim: usize) -> Result<usize> {
    match multi_index::grid_len(m, dim) {
        Some(c) if c <= BASIS_BUDGET => Ok(c),
        Some(c) => Err(Error::Resource {
            columns: c,
            budget: BASIS_BUDGET,
        }),
        None => Err(Error::Resource {
            columns: usize::MAX,
            budget: BASIS_BUDGET,
        }),
    }
}

/// Builds `Φ_{ik} = m^{-d/2} σ^{-d} p((x_i - k/m)/σ)`, columns in grid storage order.
pub fn basis_matrix(m: usize, sigma: f64, kernel: &Kernel, points: &Points) -> Result<BasisMatrix> {
    let dim = kernel.dim();
    if points.dim() != dim {
        return Err(Error::arg(format!(
            "points of dimension {} for a kernel on R^{dim}",
            points.dim()
        )));
    }
    if !(sigma > 0.0) {
        return Err(Error::arg(format!("bandwidth must be positive, got {sigma}")));
    }
    let cols = check_budget(m, dim)?;
    let scale = basis_scale(m, sigma, dim);
    let inv_sigma = 1.0 / sigma;
    let centers: Vec<Vec<f64>> = multi_index::grid_centers(m, dim).collect();
    let n = points.len();
    let mut matrix = DMatrix::zeros(n, cols);
    for (j, c) in centers.iter().enumerate() {
        let mut col = matrix.column_mut(j);
        for (i, x) in points.iter().enumerate() {
            col[i] = scale * kernel.scaled_value(x, c, inv_sigma);
        }
    }
    Ok(BasisMatrix { m, sigma, matrix })
}

/// Hyperparameters of the prior on `(M, Σ, τ)`.
///
/// `P(M = m) ∝ m^{-s}` on `{1, …, m_max}`; `Σ^d ~ InverseGamma(ig_shape, ig_rate)`;
/// `τ` uniform on `[tau_lo, tau_hi]`. `Σ` is kept inside `[sigma_lo, sigma_hi]`.
/// The prior is smoothness-blind: nothing here depends on the regularity of the
/// function being estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub s: f64,
    pub m_max: usize,
    pub ig_shape: f64,
    pub ig_rate: f64,
    pub tau_lo: f64,
    pub tau_hi: f64,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
}

impl PriorConfig {
    /// Defaults: `s = 2`, `m_max` 30 in one dimension and 12 in two,
    /// `Σ^d ~ IG(2, 0.1)`, `τ ∈ [0.01, 2]`, `σ ∈ [1e-4, 10]`.
    pub fn default_for(dim: usize) -> Self {
        let m_max = match dim {
            1 => 30,
            2 => 12,
            3 => 8,
            _ => 4,
        };
        PriorConfig {
            s: 2.0,
            m_max,
            ig_shape: 2.0,
            ig_rate: 0.1,
            tau_lo: 0.01,
            tau_hi: 2.0,
            sigma_lo: 1e-4,
            sigma_hi: 10.0,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.s > 1.0) {
            return bad(format!("zeta exponent s = {} must exceed 1", self.s));
        }
        if self.m_max == 0 {
            return bad("m_max must be positive".into());
        }
        if !(self.ig_shape > 0.0 && self.ig_rate > 0.0) {
            return bad("inverse gamma shape and rate must be positive".into());
        }
        if !(self.tau_lo > 0.0 && self.tau_lo < self.tau_hi) {
            return bad(format!(
                "tau interval [{}, {}] must satisfy 0 < lo < hi",
                self.tau_lo, self.tau_hi
            ));
        }
        if !(self.sigma_lo > 0.0 && self.sigma_lo < self.sigma_hi) {
            return bad(format!(
                "sigma clip [{}, {}] must satisfy 0 < lo < hi",
                self.sigma_lo, self.sigma_hi
            ));
        }
        check_budget(self.m_max, dim)?;
        Ok(())
    }

    /// Truncated zeta normalizer `ζ_{m_max}(s) = Σ_{m ≤ m_max} m^{-s}`.
    pub fn zeta_normalizer(&self) -> f64 {
        (1..=self.m_max).map(|m| (m as f64).powf(-self.s)).sum()
    }

    /// `log P(M = m)`, `-∞` outside the support.
    pub fn log_prior_m(&self, m: usize) -> f64 {
        if m == 0 || m > self.m_max {
            return f64::NEG_INFINITY;
        }
        -self.s * (m as f64).ln() - self.zeta_normalizer().ln()
    }

    /// Log density of `Σ` when `Σ^d ~ IG(a, b)`:
    /// `log d + (d-1) log σ + a log b - log Γ(a) - (a+1) d log σ - b σ^{-d}`.
    ///
    /// This is the untruncated density; the clip interval is applied by callers.
    pub fn log_sigma_density(&self, sigma: f64, dim: usize) -> f64 {
        if !(sigma > 0.0) {
            return f64::NEG_INFINITY;
        }
        let d = dim as f64;
        let a = self.ig_shape;
        let b = self.ig_rate;
        let ls = sigma.ln();
        d.ln() + (d - 1.0) * ls + a * b.ln() - ln_gamma(a) - (a + 1.0) * d * ls - b * (-d * ls).exp()
    }

    pub fn sigma_in_clip(&self, sigma: f64) -> bool {
        sigma >= self.sigma_lo && sigma <= self.sigma_hi
    }

    pub fn tau_in_interval(&self, tau: f64) -> bool {
        tau >= self.tau_lo && tau <= self.tau_hi
    }

    /// Uniform log density of `τ` on its interval.
    pub fn log_tau_density(&self, tau: f64) -> f64 {
        if self.tau_in_interval(tau) {
            -(self.tau_hi - self.tau_lo).ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Draws `M` from the normalized zeta law by inversion.
    pub fn sample_m<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = self.zeta_normalizer();
        let u: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        for m in 1..=self.m_max {
            acc += (m as f64).powf(-self.s);
            if u < acc {
                return m;
            }
        }
        self.m_max
    }

    /// Draws `Σ = G^{1/d}` with `G ~ IG(a, b)`, unclipped.
    pub fn sample_sigma_unclipped<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> f64 {
        let gamma = Gamma::new(self.ig_shape, 1.0 / self.ig_rate).expect("validated shape and rate");
        let g = 1.0 / gamma.sample(rng);
        g.powf(1.0 / dim as f64)
    }
}

/// Draws `(M, Σ, Z)` from the prior. Draws of `Σ` outside the clip interval
/// are moved to its nearest end and logged.
pub fn sample_prior<R: Rng + ?Sized>(config: &PriorConfig, kernel: &Kernel, rng: &mut R) -> Result<MixtureFunction> {
    let dim = kernel.dim();
    config.validate(dim)?;
    let m = config.sample_m(rng);
    let raw = config.sample_sigma_unclipped(dim, rng);
    let sigma = raw.clamp(config.sigma_lo, config.sigma_hi);
    if sigma != raw {
        log::warn!("bandwidth draw {raw:e} clipped to {sigma:e}");
    }
    let len = check_budget(m, dim)?;
    let weights = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    MixtureFunction::new(m, sigma, dim, weights)
}

/// `Cov(W^{m,σ}(x), W^{m,σ}(y)) = m^{-d} σ^{-2d} Σ_k p((x-k/m)/σ) p((y-k/m)/σ)`.
pub fn prior_covariance(m: usize, sigma: f64, kernel: &Kernel, x: &[f64], y: &[f64]) -> f64 {
    let dim = kernel.dim();
    let scale = basis_scale(m, sigma, dim);
    let inv_sigma = 1.0 / sigma;
    multi_index::grid_centers(m, dim)
        .map(|c| kernel.scaled_value(x, &c, inv_sigma) * kernel.scaled_value(y, &c, inv_sigma))
        .sum::<f64>()
        * scale
        * scale
}

/// An element of the RKHS of `W^{m,σ}`, given either by weights `w` of the
/// representation `h = Σ_k w_k σ^{-d} p((· - k/m)/σ)` or by values on a point set.
#[derive(Debug, Clone, Copy)]
pub enum RkhsElement<'a> {
    Weights(&'a [f64]),
    Values { points: &'a Points, values: &'a [f64] },
}

/// Relative singular value cutoff for the minimum-norm solve.
pub const RKHS_RCOND: f64 = 1e-10;
/// Relative residual above which values are declared outside the span.
pub const RKHS_SPAN_TOL: f64 = 1e-6;

/// `‖h‖ = m^{d/2} ‖w*‖₂`, with `w*` the minimum-norm weights representing `h`.
///
/// Weights are first mapped to values on the probe grid of `[0,1]^d`, so both
/// inputs go through the same singular value decomposition and redundant
/// representations collapse to the minimum-norm one.
pub fn rkhs_norm(m: usize, sigma: f64, kernel: &Kernel, h: RkhsElement<'_>) -> Result<f64> {
    let dim = kernel.dim();
    let cols = check_budget(m, dim)?;
    let (points, values) = match h {
        RkhsElement::Weights(w) => {
            if w.len() != cols {
                return Err(Error::arg(format!("expected {cols} weights, got {}", w.len())));
            }
            let probe = Domain::unit(dim).probe_grid();
            let phi = lemma_basis(m, sigma, kernel, &probe)?;
            let vals = &phi * DVector::from_column_slice(w);
            (probe, vals)
        }
        RkhsElement::Values { points, values } => {
            if points.len() != values.len() {
                return Err(Error::arg("points and values differ in length"));
            }
            (points.clone(), DVector::from_column_slice(values))
        }
    };
    let vnorm = values.norm();
    if vnorm == 0.0 {
        return Ok(0.0);
    }
    let phi = lemma_basis(m, sigma, kernel, &points)?;
    let w = min_norm_solve(&phi, &values, RKHS_RCOND)?;
    let residual = (&phi * &w - &values).norm() / vnorm;
    if residual > RKHS_SPAN_TOL {
        return Err(Error::NotInSpan {
            residual,
            tolerance: RKHS_SPAN_TOL,
        });
    }
    Ok((m as f64).powf(dim as f64 / 2.0) * w.norm())
}

/// Columns `σ^{-d} p((x - k/m)/σ)`, i.e. `Φ` without the `m^{-d/2}` factor.
fn lemma_basis(m: usize, sigma: f64, kernel: &Kernel, points: &Points) -> Result<DMatrix<f64>> {
    let b = basis_matrix(m, sigma, kernel, points)?;
    let factor = (m as f64).powf(kernel.dim() as f64 / 2.0);
    Ok(b.matrix * factor)
}

/// Minimum-norm least squares solution via the singular value decomposition,
/// dropping singular values below `rcond · s_max`.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> Result<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = (rcond * smax).max(f64::MIN_POSITIVE);
    svd.solve(b, eps)
        .map_err(|e| Error::Diagnostics(format!("singular value decomposition: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gauss(d: usize) -> Kernel {
        Kernel::gaussian(d).unwrap()
    }

    #[test]
    fn zero_weights_give_zero() {
        let f = MixtureFunction::zero(5, 0.3, 1).unwrap();
        for x in [0.0, 0.3, 1.0] {
            assert_eq!(eval_mixture(&f, &gauss(1), &[x]), 0.0);
        }
    }

    #[test]
    fn single_centered_term() {
        let f = MixtureFunction::new(1, 1.0, 1, vec![1.0]).unwrap();
        assert_relative_eq!(
            eval_mixture(&f, &gauss(1), &[1.0]),
            0.398_942_280_401_432_7,
            max_relative = 1e-15
        );
    }

    #[test]
    fn two_term_mixture_matches_basis_row() {
        let k = gauss(1);
        let f = MixtureFunction::new(2, 0.5, 1, vec![1.0, -1.0]).unwrap();
        let phi = basis_matrix(2, 0.5, &k, &Points::from_scalars(&[0.75])).unwrap();
        // direct sum: 2^{-1/2} · 2 · [p(0.5) - p(-0.5)] = 0 by symmetry of the two
        // centers 0.5 and 1.0 about 0.75
        let direct = 2f64.powf(-0.5) * 2.0 * (k.value(&[(0.75 - 0.5) / 0.5]) - k.value(&[(0.75 - 1.0) / 0.5]));
        let v = eval_mixture(&f, &k, &[0.75]);
        assert_relative_eq!(v, phi.apply(f.weights())[0], epsilon = 1e-15);
        assert_relative_eq!(v, direct, epsilon = 1e-15);
    }

    #[test]
    fn basis_shape_and_center_alignment() {
        let k = gauss(2);
        let pts = Points::from_rows(2, &[vec![1.0 / 3.0, 2.0 / 3.0]]).unwrap();
        let phi = basis_matrix(3, 0.2, &k, &pts).unwrap();
        assert_eq!(phi.columns(), 9);
        // k = (1, 2) sits at flat position 1
        let expected = 3f64.powf(-1.0) * 0.2f64.powi(-2) * k.value(&[0.0, 0.0]);
        assert_relative_eq!(phi.matrix[(0, 1)], expected, max_relative = 1e-14);
    }

    #[test]
    fn budget_is_enforced() {
        let k = gauss(2);
        assert!(matches!(
            basis_matrix(200, 0.1, &k, &Points::empty(2)),
            Err(Error::Resource { columns: 40_000, .. })
        ));
    }

    #[test]
    fn mixture_validation() {
        assert!(MixtureFunction::new(2, 0.0, 1, vec![0.0; 2]).is_err());
        assert!(MixtureFunction::new(2, 0.1, 2, vec![0.0; 2]).is_err());
        assert!(MixtureFunction::new(2, 0.1, 1, vec![f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn prior_sampling_is_deterministic_per_seed() {
        let cfg = PriorConfig::default_for(1);
        let k = gauss(1);
        let a = sample_prior(&cfg, &k, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = sample_prior(&cfg, &k, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn clipping_keeps_sigma_in_range() {
        let cfg = PriorConfig {
            sigma_lo: 0.5,
            sigma_hi: 0.6,
            ..PriorConfig::default_for(1)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let f = sample_prior(&cfg, &gauss(1), &mut rng).unwrap();
            assert!(f.sigma() >= 0.5 && f.sigma() <= 0.6);
        }
    }

    #[test]
    fn config_validation() {
        let ok = PriorConfig::default_for(2);
        assert!(ok.validate(2).is_ok());
        assert!(PriorConfig { s: 1.0, ..ok.clone() }.validate(2).is_err());
        assert!(PriorConfig {
            tau_lo: 0.0,
            ..ok.clone()
        }
        .validate(2)
        .is_err());
        assert!(PriorConfig {
            sigma_lo: 0.0,
            ..ok.clone()
        }
        .validate(2)
        .is_err());
        assert!(matches!(
            PriorConfig { m_max: 200, ..ok }.validate(2),
            Err(Error::Resource { .. })
        ));
    }

    #[test]
    fn zeta_prior_meets_power_lower_bound() {
        let cfg = PriorConfig::default_for(1);
        let c = 1.0 / cfg.zeta_normalizer();
        for m in 1..=cfg.m_max {
            let p = cfg.log_prior_m(m).exp();
            assert!(p >= c * (m as f64).powf(-cfg.s) * (1.0 - 1e-12));
        }
        let total: f64 = (1..=cfg.m_max).map(|m| cfg.log_prior_m(m).exp()).sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn sigma_density_integrates_to_one() {
        for d in 1..=2 {
            let cfg = PriorConfig::default_for(d);
            // substitute σ = e^t
            let (x, w) = crate::quadrature::composite_legendre(-12.0, 8.0, 16);
            let total: f64 = x
                .iter()
                .zip(&w)
                .map(|(t, w)| w * (cfg.log_sigma_density(t.exp(), d) + t).exp())
                .sum();
            assert_relative_eq!(total, 1.0, max_relative = 1e-8);
        }
    }

    #[test]
    fn sigma_log_density_has_inverse_gamma_tail_form() {
        // log g(σ) = c - q log σ - D σ^{-d}, q = d·a + 1, D = b
        for d in 1..=2 {
            let cfg = PriorConfig::default_for(d);
            let q = d as f64 * cfg.ig_shape + 1.0;
            let c = cfg.log_sigma_density(0.05, d) + q * 0.05f64.ln() + cfg.ig_rate * 0.05f64.powi(-(d as i32));
            for s in [0.001, 0.01, 0.03, 0.09] {
                let form = c - q * f64::ln(s) - cfg.ig_rate * f64::powi(s, -(d as i32));
                assert_relative_eq!(cfg.log_sigma_density(s, d), form, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn covariance_diagonal_is_sum_of_squared_basis_values() {
        let k = gauss(1);
        let x = [0.37];
        let phi = basis_matrix(6, 0.15, &k, &Points::from_scalars(&x)).unwrap();
        let sq: f64 = phi.matrix.row(0).iter().map(|v| v * v).sum();
        assert_relative_eq!(prior_covariance(6, 0.15, &k, &x, &x), sq, max_relative = 1e-13);
        assert!(prior_covariance(3, 0.01, &k, &[0.0], &[1.0]) < 1e-300);
    }

    #[test]
    fn rkhs_norm_of_zero_and_unique_weights() {
        let k = gauss(1);
        assert_eq!(rkhs_norm(4, 0.1, &k, RkhsElement::Weights(&[0.0; 4])).unwrap(), 0.0);
        let w = [0.3, -1.2, 0.5, 2.0];
        let n = rkhs_norm(4, 0.1, &k, RkhsElement::Weights(&w)).unwrap();
        let expected = (4.0 * w.iter().map(|v| v * v).sum::<f64>()).sqrt();
        assert_relative_eq!(n, expected, max_relative = 1e-8);
    }

    #[test]
    fn rkhs_norm_collapses_redundant_representations() {
        // huge σ: columns nearly collinear; any representing w has norm ≥ the minimum
        let k = gauss(1);
        let w = [1.0, 0.0, 0.0, -1.0, 0.5];
        let n = rkhs_norm(5, 50.0, &k, RkhsElement::Weights(&w)).unwrap();
        let upper = 5f64.sqrt() * w.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(n <= upper * (1.0 + 1e-12), "{n} > {upper}");
    }

    #[test]
    fn values_outside_span_are_rejected() {
        let k = gauss(1);
        let pts = Domain::unit(1).grid(101);
        let vals: Vec<f64> = pts.iter().map(|x| (40.0 * x[0]).sin()).collect();
        assert!(matches!(
            rkhs_norm(
                3,
                0.3,
                &k,
                RkhsElement::Values {
                    points: &pts,
                    values: &vals
                }
            ),
            Err(Error::NotInSpan { .. })
        ));
    }

    proptest::proptest! {
        #[test]
        fn mixture_is_linear_in_weights(
            z1 in proptest::collection::vec(-3.0f64..3.0, 5),
            z2 in proptest::collection::vec(-3.0f64..3.0, 5),
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
            x in 0.0f64..1.0,
        ) {
            let k = gauss(1);
            let combo: Vec<f64> = z1.iter().zip(&z2).map(|(u, v)| a * u + b * v).collect();
            let f1 = eval_mixture(&MixtureFunction::new(5, 0.15, 1, z1).unwrap(), &k, &[x]);
            let f2 = eval_mixture(&MixtureFunction::new(5, 0.15, 1, z2).unwrap(), &k, &[x]);
            let f = eval_mixture(&MixtureFunction::new(5, 0.15, 1, combo).unwrap(), &k, &[x]);
            let scale = (a * f1).abs() + (b * f2).abs() + 1e-300;
            proptest::prop_assert!((f - (a * f1 + b * f2)).abs() <= 1e-12 * scale.max(f.abs()));
        }

        #[test]
        fn basis_matrix_reproduces_eval_mixture(
            z in proptest::collection::vec(-3.0f64..3.0, 9),
            sigma in 0.05f64..1.0,
            x in proptest::collection::vec(0.0f64..1.0, 2),
        ) {
            let k = gauss(2);
            let f = MixtureFunction::new(3, sigma, 2, z.clone()).unwrap();
            let pts = Points::new(2, x.clone()).unwrap();
            let row = basis_matrix(3, sigma, &k, &pts).unwrap().apply(&z)[0];
            let direct = eval_mixture(&f, &k, &x);
            proptest::prop_assert!((row - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
        }

        #[test]
        fn covariance_is_symmetric_and_cauchy_schwarz(x in 0.0f64..1.0, y in 0.0f64..1.0, m in 1usize..12, sigma in 0.02f64..1.0) {
            let k = gauss(1);
            let cxy = prior_covariance(m, sigma, &k, &[x], &[y]);
            proptest::prop_assert_eq!(cxy, prior_covariance(m, sigma, &k, &[y], &[x]));
            let bound = (prior_covariance(m, sigma, &k, &[x], &[x]) * prior_covariance(m, sigma, &k, &[y], &[y])).sqrt();
            proptest::prop_assert!(cxy.abs() <= bound * (1.0 + 1e-12));
        }
    }
}
