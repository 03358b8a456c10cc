//! Moment-corrected kernel approximation.
//!
//! Convolving a smooth `f` with `p_σ(x) = σ^{-d} p(x/σ)` has a bias of order
//! `σ^2` for a nonnegative symmetric kernel. The transform
//!
//! ```text
//! T_σ f = f - Σ_{j=1}^{β} Σ_{k.=j} d_k σ^j D^k f
//! ```
//!
//! with coefficients `d_k` built from the kernel moments, removes the bias terms
//! up to order `β` (the largest integer strictly below `α`), so that
//! `‖p_σ * T_σ f - f‖_∞ = O(σ^α)` for `f ∈ C^α`. The coefficients follow the
//! recursion
//!
//! ```text
//! n. = 1:  c_n = 0,  d_n = -m_n / n!
//! n. ≥ 2:  c_n = -Σ_{n = l + k, l. ≥ 1, k. ≥ 1} (-1)^{k.} / k! · m_k d_l
//!          d_n = (-1)^{n.} m_n / n! + c_n
//! ```
//!
//! Sampling `T_σ w0` on the grid `k/m` gives weights of a mixture close to `w0`
//! whose RKHS norm is controlled by `‖T_σ w0‖_∞`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{moment_table, Kernel};
use crate::mixture::{eval_mixture, MixtureFunction};
use crate::multi_index::{self, MultiIndex};
use crate::quadrature::{legendre_cube, Domain, Points, QuadratureRule};
use crate::stats::{loglog_fit, LineFit};

pub type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type DerivativeFn = Arc<dyn Fn(&[usize], &[f64]) -> f64 + Send + Sync>;

/// Largest integer strictly smaller than `alpha`.
pub fn beta_of(alpha: f64) -> usize {
    let c = alpha.ceil();
    if c <= 1.0 {
        0
    } else {
        (c - 1.0) as usize
    }
}

/// A function of Hölder smoothness `α` with access to partial derivatives of
/// order up to `β`.
#[derive(Clone)]
pub struct SmoothFunction {
    dim: usize,
    alpha: f64,
    value: ValueFn,
    derivative: Option<DerivativeFn>,
    support: Option<Domain>,
}

impl fmt::Debug for SmoothFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothFunction")
            .field("dim", &self.dim)
            .field("alpha", &self.alpha)
            .field("analytic_derivatives", &self.derivative.is_some())
            .field("support", &self.support)
            .finish()
    }
}

impl SmoothFunction {
    pub fn new(dim: usize, alpha: f64, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if dim == 0 || !(alpha > 0.0) {
            return Err(Error::arg("dimension must be positive and α > 0"));
        }
        Ok(SmoothFunction {
            dim,
            alpha,
            value: Arc::new(f),
            derivative: None,
            support: None,
        })
    }

    /// Supplies analytic partial derivatives `D^k f(x)`; `k` is never all zeros.
    pub fn with_derivatives(mut self, d: impl Fn(&[usize], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.derivative = Some(Arc::new(d));
        self
    }

    /// Declares that `f` vanishes outside the cube.
    pub fn with_support(mut self, support: Domain) -> Self {
        self.support = Some(support);
        self
    }

    /// The zero function.
    pub fn zero(dim: usize, alpha: f64) -> Self {
        SmoothFunction::new(dim, alpha, |_| 0.0)
            .expect("valid")
            .with_derivatives(|_, _| 0.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> usize {
        beta_of(self.alpha)
    }

    pub fn support(&self) -> Option<Domain> {
        self.support
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.derivative.is_some()
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    /// `D^k f(x)`; analytic when supplied, else nested central differences.
    pub fn partial(&self, k: &[usize], x: &[f64]) -> f64 {
        if k.iter().all(|&v| v == 0) {
            return self.eval(x);
        }
        match &self.derivative {
            Some(d) => d(k, x),
            None => central_difference(&*self.value, k, x),
        }
    }
}

/// Nested central differences with step `h = (1e-4)^{1/(j+1)}`, `j = k.`.
pub fn central_difference(f: &dyn Fn(&[f64]) -> f64, k: &[usize], x: &[f64]) -> f64 {
    let order = multi_index::total(k);
    central_difference_step(f, k, x, 1e-4f64.powf(1.0 / (order as f64 + 1.0)))
}

/// Nested central differences with an explicit step.
pub fn central_difference_step(f: &dyn Fn(&[f64]) -> f64, k: &[usize], x: &[f64], h: f64) -> f64 {
    let order = multi_index::total(k);
    // tensor product of one-dimensional stencils
    let stencils: Vec<Vec<(f64, f64)>> = k
        .iter()
        .map(|&kj| {
            (0..=kj)
                .map(|l| {
                    let coef = if l % 2 == 0 { 1.0 } else { -1.0 } * multi_index::binomial(&[kj], &[l]);
                    (coef, (kj as f64 / 2.0 - l as f64) * h)
                })
                .collect()
        })
        .collect();
    let mut y = x.to_vec();
    let mut idx = vec![0usize; k.len()];
    let mut acc = 0.0;
    loop {
        let mut w = 1.0;
        for (j, &i) in idx.iter().enumerate() {
            let (c, off) = stencils[j][i];
            w *= c;
            y[j] = x[j] + off;
        }
        acc += w * f(&y);
        let mut axis = k.len();
        loop {
            if axis == 0 {
                return acc / h.powi(order as i32);
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < stencils[axis].len() {
                break;
            }
            idx[axis] = 0;
        }
    }
}

/// The coefficients `(c_n, d_n)` for `1 ≤ n. ≤ β`.
#[derive(Debug, Clone)]
pub struct CorrectionCoefficients {
    pub kernel: String,
    pub dim: usize,
    pub beta: usize,
    coefficients: BTreeMap<MultiIndex, (f64, f64)>,
    moments: BTreeMap<MultiIndex, f64>,
}

impl CorrectionCoefficients {
    pub fn c(&self, n: &[usize]) -> Option<f64> {
        self.coefficients.get(n).map(|v| v.0)
    }

    pub fn d(&self, n: &[usize]) -> Option<f64> {
        self.coefficients.get(n).map(|v| v.1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &(f64, f64))> {
        self.coefficients.iter()
    }

    /// Recomputes every `c_n` from the stored `d_l` and moments; returns the
    /// largest absolute discrepancy.
    pub fn recheck(&self) -> f64 {
        self.coefficients
            .iter()
            .map(|(n, &(c, _))| {
                let recomputed = if multi_index::total(n) == 1 {
                    0.0
                } else {
                    recursion_c(n, &self.moments, |l| self.coefficients[l].1)
                };
                (recomputed - c).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn recursion_c(n: &[usize], moments: &BTreeMap<MultiIndex, f64>, d: impl Fn(&[usize]) -> f64) -> f64 {
    let order = multi_index::total(n);
    let mut sum = 0.0;
    for lo in 1..order {
        for l in multi_index::of_total(n.len(), lo) {
            if !multi_index::dominated(&l, n) {
                continue;
            }
            let k: Vec<usize> = n.iter().zip(&l).map(|(a, b)| a - b).collect();
            let sign = if multi_index::total(&k).is_multiple_of(2) {
                1.0
            } else {
                -1.0
            };
            sum += sign / multi_index::factorial(&k) * moments[&k] * d(&l);
        }
    }
    -sum
}

/// Builds `(c_n, d_n)` by dynamic programming in increasing `n.`.
pub fn correction_coefficients(kernel: &Kernel, beta: usize, dim: usize) -> Result<CorrectionCoefficients> {
    if dim != kernel.dim() {
        return Err(Error::arg(format!(
            "coefficients for dimension {dim} from a kernel on R^{}",
            kernel.dim()
        )));
    }
    let table = moment_table(kernel, beta)?;
    let moments: BTreeMap<MultiIndex, f64> = table.iter().map(|(k, v)| (k.clone(), *v)).collect();
    let mut coefficients: BTreeMap<MultiIndex, (f64, f64)> = BTreeMap::new();
    for order in 1..=beta {
        for n in multi_index::of_total(dim, order) {
            let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
            let base = sign * moments[&n] / multi_index::factorial(&n);
            let c = if order == 1 {
                0.0
            } else {
                recursion_c(&n, &moments, |l| coefficients[l].1)
            };
            coefficients.insert(n, (c, base + c));
        }
    }
    Ok(CorrectionCoefficients {
        kernel: kernel.name().to_string(),
        dim,
        beta,
        coefficients,
        moments,
    })
}

/// `T_σ f` as a callable.
#[derive(Debug, Clone)]
pub struct CorrectedFunction {
    f: SmoothFunction,
    /// `(k, d_k σ^{k.})` for the nonzero coefficients.
    terms: Vec<(MultiIndex, f64)>,
}

impl CorrectedFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = self.f.eval(x);
        for (k, coef) in &self.terms {
            v -= coef * self.f.partial(k, x);
        }
        v
    }

    /// Number of derivative terms in the correction.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// `T_σ f = f - Σ_{1 ≤ k. ≤ β} d_k σ^{k.} D^k f`.
pub fn apply_t(f: &SmoothFunction, sigma: f64, coeffs: &CorrectionCoefficients) -> Result<CorrectedFunction> {
    if coeffs.beta != f.beta() {
        return Err(Error::arg(format!(
            "coefficients computed for β = {} but the function has β = {}",
            coeffs.beta,
            f.beta()
        )));
    }
    if coeffs.dim != f.dim() {
        return Err(Error::arg("dimension mismatch between coefficients and function"));
    }
    let terms = coeffs
        .iter()
        .filter(|(_, &(_, d))| d != 0.0)
        .map(|(k, &(_, d))| (k.clone(), d * sigma.powi(multi_index::total(k) as i32)))
        .filter(|(_, c)| *c != 0.0)
        .collect();
    Ok(CorrectedFunction { f: f.clone(), terms })
}

/// Quadrature used for `(p_σ * g)(x)`: tensorized 64-node Gauss–Legendre on
/// `[-R, R]^d` in kernel units, split into `panels` panels per axis.
#[derive(Debug, Clone)]
pub struct Convolver {
    rule: QuadratureRule,
    kernel_values: Vec<f64>,
    dim: usize,
}

/// Default panel count: 4 per axis in one dimension, 1 otherwise.
pub fn default_panels(dim: usize) -> usize {
    if dim == 1 {
        4
    } else {
        1
    }
}

impl Convolver {
    pub fn new(kernel: &Kernel, panels: usize) -> Self {
        let rule = legendre_cube(&vec![0.0; kernel.dim()], kernel.support_radius(), panels);
        let kernel_values = rule.nodes.iter().map(|u| kernel.value(u)).collect();
        Convolver {
            rule,
            kernel_values,
            dim: kernel.dim(),
        }
    }

    /// `∫ p(u) g(x - σu) du`.
    pub fn convolve(&self, sigma: f64, g: impl Fn(&[f64]) -> f64, x: &[f64]) -> f64 {
        let mut y = vec![0.0; self.dim];
        let mut acc = 0.0;
        for ((u, w), p) in self.rule.nodes.iter().zip(&self.rule.weights).zip(&self.kernel_values) {
            if *p == 0.0 {
                continue;
            }
            for j in 0..self.dim {
                y[j] = x[j] - sigma * u[j];
            }
            acc += w * p * g(&y);
        }
        acc
    }
}

/// `(p_σ * g)(x) = ∫ p_σ(y) g(x - y) dy` by tensorized Gauss–Legendre over the
/// window `x ± σR`, where the kernel carries all but `1e-10` of its mass.
pub fn convolve(kernel: &Kernel, sigma: f64, g: impl Fn(&[f64]) -> f64, x: &[f64]) -> f64 {
    Convolver::new(kernel, default_panels(kernel.dim())).convolve(sigma, g, x)
}

/// Whether the moment correction is applied before convolving.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Correction {
    #[default]
    Moment,
    /// Plain convolution `p_σ * f`, the uncorrected baseline.
    Identity,
}

/// `max_{x ∈ probe} |(p_σ * T_σ f)(x) - f(x)|`.
pub fn approximation_error(
    f: &SmoothFunction,
    kernel: &Kernel,
    sigma: f64,
    probe: &Points,
    correction: Correction,
) -> Result<f64> {
    let convolver = Convolver::new(kernel, default_panels(kernel.dim()));
    approximation_error_with(f, kernel, sigma, probe, correction, &convolver)
}

pub fn approximation_error_with(
    f: &SmoothFunction,
    kernel: &Kernel,
    sigma: f64,
    probe: &Points,
    correction: Correction,
    convolver: &Convolver,
) -> Result<f64> {
    let beta = match correction {
        Correction::Moment => f.beta(),
        Correction::Identity => 0,
    };
    let identity_f;
    let target = if beta == f.beta() {
        f
    } else {
        // β = 0 coefficients make T the identity
        identity_f = SmoothFunction {
            alpha: 1.0,
            ..f.clone()
        };
        &identity_f
    };
    let coeffs = correction_coefficients(kernel, beta, f.dim())?;
    let t = apply_t(target, sigma, &coeffs)?;
    let rows: Vec<&[f64]> = probe.iter().collect();
    let err = rows
        .par_iter()
        .map(|x| (convolver.convolve(sigma, |y| t.eval(y), x) - f.eval(x)).abs())
        .reduce(|| 0.0, f64::max);
    Ok(err)
}

/// Sup-errors for a list of bandwidths and the fitted log-log slope.
#[derive(Debug, Clone)]
pub struct SlopeStudy {
    pub sigmas: Vec<f64>,
    pub errors: Vec<f64>,
    pub fit: LineFit,
}

pub fn approximation_slope(
    f: &SmoothFunction,
    kernel: &Kernel,
    sigmas: &[f64],
    probe: &Points,
    correction: Correction,
) -> Result<SlopeStudy> {
    let convolver = Convolver::new(kernel, default_panels(kernel.dim()));
    let errors = sigmas
        .iter()
        .map(|&s| approximation_error_with(f, kernel, s, probe, correction, &convolver))
        .collect::<Result<Vec<_>>>()?;
    let fit = loglog_fit(sigmas, &errors);
    Ok(SlopeStudy {
        sigmas: sigmas.to_vec(),
        errors,
        fit,
    })
}

/// The mixture `h = Σ_k (T_σ w0)(k/m) m^{-d} σ^{-d} p((· - k/m)/σ)` and its fit.
#[derive(Debug, Clone)]
pub struct Approximant {
    /// Mixture weights `z_k = m^{-d/2} (T_σ w0)(k/m)`, so that evaluating the
    /// mixture reproduces `h` and its RKHS norm is `‖z‖₂`.
    pub mixture: MixtureFunction,
    /// `sup |h - w0|` over the probe grid of the domain.
    pub sup_error: f64,
    /// `max_k |(T_σ w0)(k/m)|`.
    pub t_sup: f64,
}

impl Approximant {
    /// `‖h‖²` of the reproducing kernel Hilbert space, `m^d Σ w_k² = Σ z_k²`.
    pub fn rkhs_norm_squared(&self) -> f64 {
        self.mixture.weights().iter().map(|z| z * z).sum()
    }
}

pub fn rkhs_approximant(
    w0: &SmoothFunction,
    kernel: &Kernel,
    m: usize,
    sigma: f64,
    domain: &Domain,
) -> Result<Approximant> {
    let dim = w0.dim();
    if domain.dim != dim || kernel.dim() != dim {
        return Err(Error::arg("dimension mismatch"));
    }
    crate::mixture::check_budget(m, dim)?;
    let coeffs = correction_coefficients(kernel, w0.beta(), dim)?;
    let t = apply_t(w0, sigma, &coeffs)?;
    let scale = (m as f64).powf(-(dim as f64) / 2.0);
    let centers: Vec<Vec<f64>> = multi_index::grid_centers(m, dim).collect();
    let tvals: Vec<f64> = centers.par_iter().map(|c| t.eval(c)).collect();
    let t_sup = tvals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let weights = tvals.iter().map(|v| v * scale).collect();
    let mixture = MixtureFunction::new(m, sigma, dim, weights)?;
    let probe = domain.probe_grid();
    let rows: Vec<&[f64]> = probe.iter().collect();
    let sup_error = rows
        .par_iter()
        .map(|x| (eval_mixture(&mixture, kernel, x) - w0.eval(x)).abs())
        .reduce(|| 0.0, f64::max);
    Ok(Approximant {
        mixture,
        sup_error,
        t_sup,
    })
}

/// Coefficients of the smoothstep polynomial `S_N` of degree `2N + 1`, which
/// rises from 0 to 1 on `[0, 1]` with `N` vanishing derivatives at both ends.
fn smoothstep_coefficients(order: usize) -> Vec<f64> {
    let n = order;
    let mut coef = vec![0.0; 2 * n + 2];
    for i in 0..=n {
        let c = multi_index::binomial(&[n + i], &[i]) * multi_index::binomial(&[2 * n + 1], &[n - i]);
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        coef[n + 1 + i] = sign * c;
    }
    coef
}

fn poly_derivative(coef: &[f64], order: usize, u: f64) -> f64 {
    coef.iter()
        .enumerate()
        .skip(order)
        .map(|(p, &c)| {
            let falling: f64 = (0..order).map(|i| (p - i) as f64).product();
            c * falling * u.powi((p - order) as i32)
        })
        .sum()
}

/// A one-dimensional plateau: 1 on `[a, b]`, 0 outside `[a - margin, b + margin]`,
/// joined by smoothstep ramps with `smoothness` continuous derivatives.
#[derive(Debug, Clone)]
struct Plateau {
    a: f64,
    b: f64,
    margin: f64,
    coef: Vec<f64>,
}

impl Plateau {
    fn derivative(&self, order: usize, t: f64) -> f64 {
        let (u, dir) = if t <= self.a - self.margin || t >= self.b + self.margin {
            return 0.0;
        } else if t < self.a {
            ((t - (self.a - self.margin)) / self.margin, 1.0)
        } else if t > self.b {
            ((self.b + self.margin - t) / self.margin, -1.0)
        } else {
            return if order == 0 { 1.0 } else { 0.0 };
        };
        let chain = (dir / self.margin).powi(order as i32);
        chain * poly_derivative(&self.coef, order, u)
    }
}

/// Extends `w0`, given on `X = [a, b]^d`, to a function supported in
/// `[a - margin, b + margin]^d ⊂ (0, 1)^d` by multiplying with a smooth plateau
/// equal to one on `X`. `w0` itself must be evaluable on the enlarged cube.
pub fn extend_with_compact_support(w0: &SmoothFunction, domain: &Domain, margin: f64) -> Result<SmoothFunction> {
    if !domain.is_strict_interior() {
        return Err(Error::arg(format!(
            "domain [{}, {}] must lie strictly inside (0, 1)",
            domain.lo, domain.hi
        )));
    }
    if !(margin > 0.0) || margin >= domain.lo.min(1.0 - domain.hi) {
        return Err(Error::arg(format!(
            "margin {margin} must be positive and below min(a, 1 - b) = {}",
            domain.lo.min(1.0 - domain.hi)
        )));
    }
    let smoothness = w0.beta() + 2;
    let plateau = Plateau {
        a: domain.lo,
        b: domain.hi,
        margin,
        coef: smoothstep_coefficients(smoothness),
    };
    let dim = w0.dim();
    let bump = {
        let p = plateau.clone();
        move |k: &[usize], x: &[f64]| -> f64 { k.iter().zip(x).map(|(&kj, &xj)| p.derivative(kj, xj)).product() }
    };
    let value_w0 = w0.clone();
    let value_bump = bump.clone();
    let zeros = vec![0usize; dim];
    let value = move |x: &[f64]| {
        let b = value_bump(&zeros, x);
        if b == 0.0 {
            0.0
        } else {
            b * value_w0.eval(x)
        }
    };
    let deriv_w0 = w0.clone();
    let derivative = move |k: &[usize], x: &[f64]| {
        // Leibniz rule over all l ≤ k
        let mut acc = 0.0;
        for order in 0..=multi_index::total(k) {
            for l in multi_index::of_total(k.len(), order) {
                if !multi_index::dominated(&l, k) {
                    continue;
                }
                let rest: Vec<usize> = k.iter().zip(&l).map(|(a, b)| a - b).collect();
                let b = bump(&rest, x);
                if b != 0.0 {
                    acc += multi_index::binomial(k, &l) * b * deriv_w0.partial(&l, x);
                }
            }
        }
        acc
    };
    let support = Domain::new(domain.lo - margin, domain.hi + margin, dim)?;
    Ok(SmoothFunction::new(dim, w0.alpha(), value)?
        .with_derivatives(derivative)
        .with_support(support))
}
