//! Smoothing kernels `p: R^d → R` of a given regularity class, and their moments.
//!
//! A kernel must integrate to one, be uniformly Lipschitz and have finite
//! moments of every order. Its regularity `γ` is either a Hölder exponent with
//! `γ > d/2` or [`Regularity::Analytic`] for kernels that extend analytically to
//! a complex strip (the standard Gaussian is the reference example). Kernels
//! need not be nonnegative.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multi_index::{self, MultiIndex};
use crate::quadrature::{legendre_cube, QuadratureRule};

/// Regularity class of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Regularity {
    /// `p ∈ C^γ(R^d)` with `γ > d/2`.
    Holder(f64),
    /// Bounded analytic extension to the strip `|Im z_j| ≤ 1`.
    Analytic,
}

impl Regularity {
    pub fn is_analytic(self) -> bool {
        matches!(self, Regularity::Analytic)
    }

    /// `γ`, with `f64::INFINITY` for analytic kernels.
    pub fn gamma(self) -> f64 {
        match self {
            Regularity::Holder(g) => g,
            Regularity::Analytic => f64::INFINITY,
        }
    }
}

/// Kernel selection as it appears in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KernelChoice {
    #[default]
    Gaussian,
    Triangular,
    /// Code-level kernels only; cannot be built from a config file.
    Custom,
}

impl KernelChoice {
    pub fn build(self, dim: usize) -> Result<Kernel> {
        match self {
            KernelChoice::Gaussian => Kernel::gaussian(dim),
            KernelChoice::Triangular => Kernel::triangular(dim),
            KernelChoice::Custom => Err(Error::Config("custom kernels must be constructed in code".into())),
        }
    }
}

type KernelFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Form {
    Gaussian,
    Triangular,
    Custom(KernelFn),
}

/// A kernel `p` on `R^d`. Immutable once built; cheap to clone.
#[derive(Clone)]
pub struct Kernel {
    name: String,
    dim: usize,
    regularity: Regularity,
    lipschitz: f64,
    support_radius: f64,
    moment_order_max: usize,
    symmetric: bool,
    form: Form,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("regularity", &self.regularity)
            .field("lipschitz", &self.lipschitz)
            .field("support_radius", &self.support_radius)
            .field("moment_order_max", &self.moment_order_max)
            .finish()
    }
}

/// Default highest total moment order.
pub const DEFAULT_MOMENT_ORDER: usize = 10;

/// Radius beyond which the standard Gaussian has negligible mass, including
/// when weighted by monomials up to the default moment order.
const GAUSSIAN_RADIUS: f64 = 8.5;

fn check_regularity(regularity: Regularity, dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::arg("kernel dimension must be positive"));
    }
    if let Regularity::Holder(g) = regularity {
        if !(g > dim as f64 / 2.0) {
            return Err(Error::arg(format!(
                "kernel regularity γ = {g} must exceed d/2 = {}",
                dim as f64 / 2.0
            )));
        }
    }
    Ok(())
}

impl Kernel {
    /// Standard normal density on `R^d`.
    pub fn gaussian(dim: usize) -> Result<Self> {
        check_regularity(Regularity::Analytic, dim)?;
        // max ‖∇p‖ = (2π)^{-d/2} e^{-1/2}, attained at ‖x‖ = 1.
        let lipschitz = (2.0 * PI).powf(-(dim as f64) / 2.0) * (-0.5f64).exp();
        Ok(Kernel {
            name: "gaussian".into(),
            dim,
            regularity: Regularity::Analytic,
            lipschitz,
            support_radius: GAUSSIAN_RADIUS,
            moment_order_max: DEFAULT_MOMENT_ORDER,
            symmetric: true,
            form: Form::Gaussian,
        })
    }

    /// Product triangle kernel `∏ (1 - |x_j|)_+`, Lipschitz with `γ = 1`.
    ///
    /// Only `d = 1` satisfies `γ > d/2`.
    pub fn triangular(dim: usize) -> Result<Self> {
        check_regularity(Regularity::Holder(1.0), dim)?;
        Ok(Kernel {
            name: "triangular".into(),
            dim,
            regularity: Regularity::Holder(1.0),
            lipschitz: 1.0,
            support_radius: 1.0,
            moment_order_max: DEFAULT_MOMENT_ORDER,
            symmetric: true,
            form: Form::Triangular,
        })
    }

    /// A user-supplied kernel. `support_radius` bounds the region outside
    /// which `p` is negligible (tail mass below `1e-10`); it sets the
    /// quadrature window. Moments are computed by quadrature.
    pub fn custom(
        name: impl Into<String>,
        dim: usize,
        regularity: Regularity,
        lipschitz: f64,
        support_radius: f64,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        check_regularity(regularity, dim)?;
        if !(lipschitz >= 0.0) || !(support_radius > 0.0) {
            return Err(Error::arg("lipschitz bound must be >= 0 and support radius > 0"));
        }
        Ok(Kernel {
            name: name.into(),
            dim,
            regularity,
            lipschitz,
            support_radius,
            moment_order_max: DEFAULT_MOMENT_ORDER,
            symmetric: false,
            form: Form::Custom(Arc::new(f)),
        })
    }

    /// Declares the kernel symmetric, so odd moments are reported as exact zeros.
    pub fn with_symmetry(mut self, symmetric: bool) -> Self {
        self.symmetric = symmetric;
        self
    }

    pub fn with_moment_order_max(mut self, order: usize) -> Self {
        self.moment_order_max = order;
        self
    }

    pub fn with_support_radius(mut self, radius: f64) -> Self {
        self.support_radius = radius;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn regularity(&self) -> Regularity {
        self.regularity
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn moment_order_max(&self) -> usize {
        self.moment_order_max
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.form, Form::Gaussian)
    }

    /// `p(x)` without the dimension check.
    #[inline]
    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        match &self.form {
            Form::Gaussian => {
                let sq: f64 = x.iter().map(|v| v * v).sum();
                gaussian_norm(self.dim) * (-0.5 * sq).exp()
            }
            Form::Triangular => x.iter().map(|v| (1.0 - v.abs()).max(0.0)).product(),
            Form::Custom(f) => f(x),
        }
    }

    /// `p((x - c)/σ)` for a center `c`, without allocating.
    #[inline]
    pub(crate) fn scaled_value(&self, x: &[f64], center: &[f64], inv_sigma: f64) -> f64 {
        match &self.form {
            Form::Gaussian => {
                let sq: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(a, c)| {
                        let u = (a - c) * inv_sigma;
                        u * u
                    })
                    .sum();
                // exp underflows to exactly 0 below about -745.
                gaussian_norm(self.dim) * (-0.5 * sq).exp()
            }
            Form::Triangular => x
                .iter()
                .zip(center)
                .map(|(a, c)| (1.0 - ((a - c) * inv_sigma).abs()).max(0.0))
                .product(),
            Form::Custom(f) => {
                let u: Vec<f64> = x.iter().zip(center).map(|(a, c)| (a - c) * inv_sigma).collect();
                f(&u)
            }
        }
    }

    /// `log p(x)` for the Gaussian kernel.
    pub fn gaussian_log_value(&self, x: &[f64]) -> Option<f64> {
        match self.form {
            Form::Gaussian => {
                let sq: f64 = x.iter().map(|v| v * v).sum();
                Some(gaussian_norm(self.dim).ln() - 0.5 * sq)
            }
            _ => None,
        }
    }

    /// Quadrature rule for integrals against `p` on `[-R, R]^d`.
    ///
    /// Two panels per axis so that a kink at the origin falls on a panel edge.
    pub fn quadrature(&self) -> QuadratureRule {
        legendre_cube(&vec![0.0; self.dim], self.support_radius, 2)
    }
}

fn gaussian_norm(dim: usize) -> f64 {
    (2.0 * PI).powf(-(dim as f64) / 2.0)
}

/// Evaluates `p(x)`.
pub fn eval_kernel(kernel: &Kernel, x: &[f64]) -> Result<f64> {
    if x.len() != kernel.dim {
        return Err(Error::arg(format!(
            "point of dimension {} for a kernel on R^{}",
            x.len(),
            kernel.dim
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("kernel evaluated at a non-finite point"));
    }
    Ok(kernel.value(x))
}

/// Moments `E[Z^j]` of the standard normal: `(j-1)!!` for even `j`, 0 for odd.
pub fn gaussian_moment_1d(j: usize) -> f64 {
    if j % 2 == 1 {
        0.0
    } else {
        (1..j).step_by(2).map(|v| v as f64).product()
    }
}

/// `m_k = ∫ y^k p(y) dy`.
pub fn kernel_moment(kernel: &Kernel, k: &[usize]) -> Result<f64> {
    check_moment_request(kernel, k)?;
    if kernel.symmetric && k.iter().any(|kj| kj % 2 == 1) {
        return Ok(0.0);
    }
    match kernel.form {
        Form::Gaussian => Ok(k.iter().map(|&kj| gaussian_moment_1d(kj)).product()),
        _ => Ok(quadrature_moment(kernel, k)),
    }
}

fn check_moment_request(kernel: &Kernel, k: &[usize]) -> Result<()> {
    if k.len() != kernel.dim {
        return Err(Error::arg(format!(
            "multi-index of length {} for a kernel on R^{}",
            k.len(),
            kernel.dim
        )));
    }
    let order = multi_index::total(k);
    if order > kernel.moment_order_max {
        return Err(Error::UnsupportedOrder {
            order,
            max: kernel.moment_order_max,
        });
    }
    Ok(())
}

/// `m_k` by tensorized Gauss–Legendre quadrature, regardless of kernel form.
pub fn quadrature_moment(kernel: &Kernel, k: &[usize]) -> f64 {
    kernel
        .quadrature()
        .integrate(|y| multi_index::power(y, k) * kernel.value(y))
}

/// Moments `m_k` for all `k. <= order`.
#[derive(Debug, Clone)]
pub struct MomentTable {
    pub kernel: String,
    pub dim: usize,
    pub order: usize,
    moments: BTreeMap<MultiIndex, f64>,
}

impl MomentTable {
    pub fn get(&self, k: &[usize]) -> Option<f64> {
        self.moments.get(k).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &f64)> {
        self.moments.iter()
    }
}

/// Builds the table of moments up to the given total order.
pub fn moment_table(kernel: &Kernel, order: usize) -> Result<MomentTable> {
    if order > kernel.moment_order_max {
        return Err(Error::UnsupportedOrder {
            order,
            max: kernel.moment_order_max,
        });
    }
    let indices = multi_index::up_to_total(kernel.dim, order);
    let mut moments = BTreeMap::new();
    if kernel.is_gaussian() {
        for k in indices {
            let v = kernel_moment(kernel, &k)?;
            moments.insert(k, v);
        }
    } else {
        // one pass over the nodes for every moment
        let rule = kernel.quadrature();
        let values: Vec<f64> = rule.nodes.iter().map(|y| kernel.value(y)).collect();
        for k in indices {
            let v = if kernel.symmetric && k.iter().any(|kj| kj % 2 == 1) {
                0.0
            } else {
                rule.nodes
                    .iter()
                    .zip(&rule.weights)
                    .zip(&values)
                    .map(|((y, w), p)| w * p * multi_index::power(y, &k))
                    .sum()
            };
            moments.insert(k, v);
        }
    }
    Ok(MomentTable {
        kernel: kernel.name.clone(),
        dim: kernel.dim,
        order,
        moments,
    })
}

/// Tolerances for [`validate_kernel`].
#[derive(Debug, Clone, Copy)]
pub struct ValidationTolerances {
    /// Allowed `|∫p - 1|`.
    pub normalization: f64,
    /// Relative slack on the declared Lipschitz bound.
    pub lipschitz_slack: f64,
    /// Grid points per axis for the Lipschitz scan.
    pub lipschitz_grid: usize,
}

impl Default for ValidationTolerances {
    fn default() -> Self {
        ValidationTolerances {
            normalization: 1e-6,
            lipschitz_slack: 1e-9,
            lipschitz_grid: 401,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub integral: f64,
    pub normalization_ok: bool,
    pub max_lipschitz_ratio: f64,
    pub lipschitz_ok: bool,
    pub moments_finite: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.normalization_ok && self.lipschitz_ok && self.moments_finite
    }
}

/// Checks normalization, the Lipschitz bound on a grid, and finiteness of all
/// moments up to `moment_order_max`. Failures are reported, not raised.
pub fn validate_kernel(kernel: &Kernel, tol: ValidationTolerances) -> ValidationReport {
    let integral = kernel.quadrature().integrate(|y| kernel.value(y));
    let normalization_ok = (integral - 1.0).abs() <= tol.normalization;

    let d = kernel.dim;
    let per_axis = if d == 1 {
        tol.lipschitz_grid
    } else {
        ((tol.lipschitz_grid as f64).powf(1.0 / d as f64).ceil() as usize).max(21)
    };
    let r = kernel.support_radius * 1.1;
    let h = 2.0 * r / (per_axis - 1) as f64;
    let mut max_ratio: f64 = 0.0;
    let total = multi_index::grid_len(per_axis, d).unwrap_or(0);
    let mut idx = vec![0usize; d];
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    for flat in 0..total {
        multi_index::grid_index(flat, per_axis, &mut idx);
        for j in 0..d {
            x[j] = -r + h * (idx[j] - 1) as f64;
        }
        let px = kernel.value(&x);
        for axis in 0..d {
            if idx[axis] == per_axis {
                continue;
            }
            y.copy_from_slice(&x);
            y[axis] += h;
            max_ratio = max_ratio.max((kernel.value(&y) - px).abs() / h);
        }
    }
    let lipschitz_ok = max_ratio <= kernel.lipschitz * (1.0 + tol.lipschitz_slack) + 1e-15;

    let moments_finite = moment_table(kernel, kernel.moment_order_max)
        .map(|t| t.iter().all(|(_, v)| v.is_finite()))
        .unwrap_or(false);

    ValidationReport {
        integral,
        normalization_ok,
        max_lipschitz_ratio: max_ratio,
        lipschitz_ok,
        moments_finite,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gaussian_values_at_origin() {
        let k1 = Kernel::gaussian(1).unwrap();
        assert_relative_eq!(
            eval_kernel(&k1, &[0.0]).unwrap(),
            0.398_942_280_401_432_7,
            max_relative = 1e-15
        );
        let k2 = Kernel::gaussian(2).unwrap();
        assert_relative_eq!(
            eval_kernel(&k2, &[0.0, 0.0]).unwrap(),
            1.0 / (2.0 * PI),
            max_relative = 1e-15
        );
        assert_eq!(eval_kernel(&k1, &[1.0]).unwrap(), eval_kernel(&k1, &[-1.0]).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let k = Kernel::gaussian(2).unwrap();
        assert!(matches!(eval_kernel(&k, &[0.0]), Err(Error::Argument(_))));
        assert!(matches!(kernel_moment(&k, &[2]), Err(Error::Argument(_))));
    }

    #[test]
    fn regularity_must_exceed_half_dimension() {
        assert!(Kernel::triangular(1).is_ok());
        assert!(Kernel::triangular(2).is_err());
        assert!(Kernel::custom("c", 2, Regularity::Holder(1.0), 1.0, 1.0, |_| 0.0).is_err());
        assert!(Kernel::custom("c", 2, Regularity::Holder(1.01), 1.0, 1.0, |_| 0.0).is_ok());
    }

    #[test]
    fn gaussian_moments() {
        let k2 = Kernel::gaussian(2).unwrap();
        assert_eq!(kernel_moment(&k2, &[1, 1]).unwrap(), 0.0);
        let k1 = Kernel::gaussian(1).unwrap();
        assert_eq!(kernel_moment(&k1, &[2]).unwrap(), 1.0);
        assert_eq!(kernel_moment(&k1, &[4]).unwrap(), 3.0);
        assert_eq!(kernel_moment(&k1, &[0]).unwrap(), 1.0);
        assert!(matches!(
            kernel_moment(&k1, &[11]),
            Err(Error::UnsupportedOrder { order: 11, max: 10 })
        ));
    }

    #[test]
    fn fourth_gaussian_moment_matches_quadrature() {
        // x^4 φ(x) integrated numerically
        let k1 = Kernel::gaussian(1).unwrap();
        let q = quadrature_moment(&k1, &[4]);
        assert_relative_eq!(q, 3.0, max_relative = 1e-12);
    }

    #[test]
    fn analytic_and_quadrature_moments_agree_to_order_eight() {
        for d in 1..=2 {
            let k = Kernel::gaussian(d).unwrap();
            for k_idx in multi_index::up_to_total(d, 8) {
                let exact = kernel_moment(&k, &k_idx).unwrap();
                let quad = quadrature_moment(&k, &k_idx);
                if exact == 0.0 {
                    assert!(quad.abs() < 1e-9, "{k_idx:?}: {quad}");
                } else {
                    assert_relative_eq!(quad, exact, max_relative = 1e-6);
                }
            }
        }
    }

    #[test]
    fn moment_table_invariants() {
        let tri = Kernel::triangular(1).unwrap();
        let t = moment_table(&tri, 6).unwrap();
        assert_relative_eq!(t.get(&[0]).unwrap(), 1.0, max_relative = 1e-13);
        assert_eq!(t.get(&[3]).unwrap(), 0.0);
        // ∫ x² (1-|x|) dx = 1/6
        assert_relative_eq!(t.get(&[2]).unwrap(), 1.0 / 6.0, max_relative = 1e-12);
        let g = moment_table(&Kernel::gaussian(2).unwrap(), 4).unwrap();
        assert_eq!(g.get(&[2, 2]).unwrap(), 1.0);
        assert_eq!(g.get(&[4, 0]).unwrap(), 3.0);
    }

    #[test]
    fn validation_reports() {
        let report = validate_kernel(&Kernel::gaussian(1).unwrap(), Default::default());
        assert!(report.passed(), "{report:?}");
        assert!((report.integral - 1.0).abs() < 1e-6);
        let report = validate_kernel(&Kernel::gaussian(2).unwrap(), Default::default());
        assert!(report.passed(), "{report:?}");

        let doubled = Kernel::custom("doubled", 1, Regularity::Analytic, 2.0 * 0.242, 8.5, |x| {
            2.0 * (-0.5 * x[0] * x[0]).exp() / (2.0 * PI).sqrt()
        })
        .unwrap();
        let report = validate_kernel(&doubled, Default::default());
        assert!(!report.normalization_ok);
        assert!((report.integral - 2.0).abs() < 1e-9);

        // triangle: ∫(1-|x|)_+ = 1 exactly, slope 1
        let report = validate_kernel(&Kernel::triangular(1).unwrap(), Default::default());
        assert!(report.normalization_ok && report.lipschitz_ok, "{report:?}");
        assert_relative_eq!(report.integral, 1.0, max_relative = 1e-13);
    }

    #[test]
    fn understated_lipschitz_bound_fails() {
        let k = Kernel::custom("tight", 1, Regularity::Analytic, 0.1, 8.5, |x| {
            (-0.5 * x[0] * x[0]).exp() / (2.0 * PI).sqrt()
        })
        .unwrap();
        assert!(!validate_kernel(&k, Default::default()).lipschitz_ok);
    }

    #[test]
    fn signed_fourth_order_kernel_is_supported() {
        // (3 - x²)/2 · φ(x): integrates to one, second moment zero, negative tails
        let k = Kernel::custom("signed", 1, Regularity::Analytic, 0.7, 9.0, |x| {
            0.5 * (3.0 - x[0] * x[0]) * (-0.5 * x[0] * x[0]).exp() / (2.0 * PI).sqrt()
        })
        .unwrap()
        .with_symmetry(true);
        assert!(k.value(&[3.0]) < 0.0);
        let report = validate_kernel(&k, Default::default());
        assert!(report.passed(), "{report:?}");
        assert!(kernel_moment(&k, &[2]).unwrap().abs() < 1e-10);
        assert_relative_eq!(kernel_moment(&k, &[4]).unwrap(), -3.0, max_relative = 1e-9);
    }
}
