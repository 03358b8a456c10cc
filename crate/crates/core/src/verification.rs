//! Computable versions of the theoretical quantities: rate exponents,
//! small-ball probabilities of the prior process, the concentration function
//! and the tail condition on the bandwidth density.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approximation::{rkhs_approximant, SmoothFunction};
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::mixture::{basis_matrix, min_norm_solve, rkhs_norm, PriorConfig, RkhsElement};
use crate::quadrature::{Domain, Points};
use crate::stats::{fit_line, LineFit};

/// Inputs of the rate formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParameters {
    /// Smoothness of the truth.
    pub alpha: f64,
    pub d: usize,
    /// Kernel regularity; `None` for analytic kernels (`γ = ∞`).
    pub gamma: Option<f64>,
    /// Log power in the tail condition on the bandwidth density.
    pub r: f64,
}

impl RateParameters {
    pub fn new(alpha: f64, d: usize, gamma: Option<f64>, r: f64) -> Result<Self> {
        let p = RateParameters { alpha, d, gamma, r };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::arg(format!("smoothness α = {} must be positive", self.alpha)));
        }
        if self.d == 0 {
            return Err(Error::arg("dimension must be positive"));
        }
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(Error::arg(format!("log power r = {} must be nonnegative", self.r)));
        }
        if let Some(g) = self.gamma {
            if !(g > self.d as f64 / 2.0) {
                return Err(Error::arg(format!(
                    "kernel regularity γ = {g} must exceed d/2 = {}",
                    self.d as f64 / 2.0
                )));
            }
        }
        Ok(())
    }

    /// `d_γ = 2d(d+γ)/(2γ-d)`, equal to `d` when `γ = ∞`.
    pub fn d_gamma(&self) -> f64 {
        let d = self.d as f64;
        match self.gamma {
            Some(g) if g.is_finite() => 2.0 * d * (d + g) / (2.0 * g - d),
            _ => d,
        }
    }

    /// `δ_γ = d/(2γ-d)`, zero when `γ = ∞`.
    pub fn delta_gamma(&self) -> f64 {
        let d = self.d as f64;
        match self.gamma {
            Some(g) if g.is_finite() => d / (2.0 * g - d),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateBranch {
    FiniteGamma,
    Analytic,
}

/// `ε_n = n^{-a} log^{s} n` and `ε̄_n = n^{-ā} log^{s̄} n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub branch: RateBranch,
    pub eps_exponent: f64,
    pub eps_log_power: f64,
    pub eps_bar_exponent: f64,
    pub eps_bar_log_power: f64,
    /// Set when `dδ_γ/(2γ) ≥ 1`, where no contraction rate follows.
    pub flagged: bool,
}

pub fn rate_exponents(params: &RateParameters) -> Result<RateResult> {
    params.validate()?;
    let a = params.alpha;
    let d = params.d as f64;
    match params.gamma {
        Some(g) if g.is_finite() => {
            let dg = params.d_gamma();
            let delta = params.delta_gamma();
            let denom = dg + 2.0 * a * (1.0 + delta);
            let loss = d * delta / (2.0 * g);
            Ok(RateResult {
                branch: RateBranch::FiniteGamma,
                eps_exponent: a / denom,
                eps_log_power: 0.0,
                eps_bar_exponent: a * (1.0 - loss) / (denom * (1.0 + d / (2.0 * g))),
                eps_bar_log_power: 0.0,
                flagged: loss >= 1.0,
            })
        }
        _ => {
            let exponent = a / (d + 2.0 * a);
            let t = params.r.max(1.0 + d) / (2.0 + d / a);
            Ok(RateResult {
                branch: RateBranch::Analytic,
                eps_exponent: exponent,
                eps_log_power: t,
                eps_bar_exponent: exponent,
                eps_bar_log_power: t + (1.0 + d - params.r).max(0.0) / 2.0,
                flagged: false,
            })
        }
    }
}

const WILSON_Z: f64 = 1.959_963_984_540_054;
const BATCH: usize = 2048;

/// Wilson score interval for a binomial proportion at the 95% level.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = WILSON_Z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == trials {
        1.0
    } else {
        (centre + half).min(1.0)
    };
    (lo, hi)
}

/// Monte Carlo estimate of `-log P(sup_probe |W^{m,σ}| < ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallBallEstimate {
    pub eps: f64,
    pub draws: u64,
    pub successes: u64,
    pub probability: f64,
    /// `-log` of the estimated probability; with no successes, the lower
    /// bound `-log` of the upper Wilson limit.
    pub neg_log: f64,
    pub neg_log_lower: f64,
    /// `+∞` with no successes.
    pub neg_log_upper: f64,
    pub zero_successes: bool,
}

impl SmallBallEstimate {
    fn from_counts(eps: f64, successes: u64, draws: u64) -> Self {
        let (lo, hi) = wilson_interval(successes, draws);
        let probability = successes as f64 / draws as f64;
        let zero = successes == 0;
        SmallBallEstimate {
            eps,
            draws,
            successes,
            probability,
            neg_log: if zero { -hi.ln() } else { -probability.ln() },
            neg_log_lower: -hi.ln(),
            neg_log_upper: -lo.ln(),
            zero_successes: zero,
        }
    }
}

/// `sup_probe |W|` for `n_draws` prior draws of `W^{m,σ}`.
///
/// Draws come in fixed-size batches, batch `b` using stream `b` of a ChaCha
/// generator keyed by one word from `rng`, so results do not depend on the
/// number of threads.
pub fn sup_norm_draws<R: Rng + ?Sized>(
    m: usize,
    sigma: f64,
    kernel: &Kernel,
    n_draws: usize,
    probe: &Points,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if n_draws == 0 {
        return Err(Error::arg("need at least one draw"));
    }
    if probe.is_empty() {
        return Err(Error::arg("probe grid is empty"));
    }
    let phi = basis_matrix(m, sigma, kernel, probe)?.matrix;
    let cols = phi.ncols();
    let key: u64 = rng.random();
    let batches = n_draws.div_ceil(BATCH);
    let sups: Vec<Vec<f64>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut stream = ChaCha8Rng::seed_from_u64(key);
            stream.set_stream(b as u64);
            let size = BATCH.min(n_draws - b * BATCH);
            let z = DMatrix::from_fn(cols, size, |_, _| stream.sample::<f64, _>(StandardNormal));
            let w = &phi * z;
            w.column_iter().map(|c| c.amax()).collect()
        })
        .collect();
    Ok(sups.concat())
}

/// Counts the draws with `sup < ε` for each `ε`.
pub fn small_ball_from_sups(sups: &[f64], eps: &[f64]) -> Result<Vec<SmallBallEstimate>> {
    if sups.is_empty() {
        return Err(Error::arg("need at least one draw"));
    }
    let mut sorted = sups.to_vec();
    sorted.sort_by(f64::total_cmp);
    eps.iter()
        .map(|&e| {
            if !(e > 0.0) {
                return Err(Error::arg(format!("radius ε = {e} must be positive")));
            }
            let successes = sorted.partition_point(|&s| s < e) as u64;
            Ok(SmallBallEstimate::from_counts(e, successes, sorted.len() as u64))
        })
        .collect()
}

/// Direct simulation of `-log P(sup_probe |W^{m,σ}| < ε)` with a 95% Wilson
/// interval. Adequate while the probability stays above about `1e-4`.
pub fn small_ball_mc<R: Rng + ?Sized>(
    m: usize,
    sigma: f64,
    kernel: &Kernel,
    eps: f64,
    n_draws: usize,
    probe: &Points,
    rng: &mut R,
) -> Result<SmallBallEstimate> {
    if !(eps > 0.0) {
        return Err(Error::arg(format!("radius ε = {eps} must be positive")));
    }
    let sups = sup_norm_draws(m, sigma, kernel, n_draws, probe, rng)?;
    Ok(small_ball_from_sups(&sups, &[eps])?.remove(0))
}

/// Estimates on a list of radii from one common set of draws, so the curve is
/// monotone in `ε`.
pub fn small_ball_curve<R: Rng + ?Sized>(
    m: usize,
    sigma: f64,
    kernel: &Kernel,
    eps: &[f64],
    n_draws: usize,
    probe: &Points,
    rng: &mut R,
) -> Result<Vec<SmallBallEstimate>> {
    let sups = sup_norm_draws(m, sigma, kernel, n_draws, probe, rng)?;
    small_ball_from_sups(&sups, eps)
}

/// Outcome of comparing a small-ball curve with the bound
/// `-log P(‖W‖ < ε) ≤ a + b ε^{-2d/(2γ-d)}`.
#[derive(Debug, Clone, Serialize)]
pub struct SmallBallShape {
    pub power: f64,
    /// Line in `t = ε^{-power}` fitted to the larger half of the radii.
    pub fit: LineFit,
    pub eps: Vec<f64>,
    pub t: Vec<f64>,
    /// `neg_log_lower - fit(t)` at every radius.
    pub residuals: Vec<f64>,
    pub passed: bool,
}

/// Fits `a + b t`, `t = ε^{-2d/(2γ-d)}`, to the larger half of the radii and
/// checks that the smaller radii stay below the extrapolated line: the
/// lower confidence limit of each held-out point must not exceed it.
pub fn small_ball_shape_check(estimates: &[SmallBallEstimate], gamma: f64, d: usize) -> Result<SmallBallShape> {
    let dd = d as f64;
    if !(gamma > dd / 2.0) || !gamma.is_finite() {
        return Err(Error::arg("shape check needs a finite kernel regularity γ > d/2"));
    }
    if estimates.len() < 4 {
        return Err(Error::arg("shape check needs at least four radii"));
    }
    if estimates.iter().any(|e| e.zero_successes) {
        return Err(Error::Precondition(
            "a radius has no successes; raise the draw count or the radius".into(),
        ));
    }
    let power = 2.0 * dd / (2.0 * gamma - dd);
    let mut sorted = estimates.to_vec();
    sorted.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    let t: Vec<f64> = sorted.iter().map(|e| e.eps.powf(-power)).collect();
    let y: Vec<f64> = sorted.iter().map(|e| e.neg_log).collect();
    let half = sorted.len().div_ceil(2);
    let fit = fit_line(&t[..half], &y[..half]);
    let residuals: Vec<f64> = sorted
        .iter()
        .zip(&t)
        .map(|(e, &ti)| e.neg_log_lower - fit.predict(ti))
        .collect();
    let passed = fit.slope.is_finite() && residuals[half..].iter().all(|&r| r <= 0.0);
    Ok(SmallBallShape {
        power,
        fit,
        eps: sorted.iter().map(|e| e.eps).collect(),
        t,
        residuals,
        passed,
    })
}

/// Upper bound `‖h‖² - log P(‖W‖ < ε)` on the concentration function at `w0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcentrationBound {
    pub rkhs_term: f64,
    pub small_ball: SmallBallEstimate,
    /// `sup |h - w0|` over the domain, or `0` for RKHS elements.
    pub approximation_error: f64,
    pub total: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn concentration_upper<R: Rng + ?Sized>(
    w0: &SmoothFunction,
    kernel: &Kernel,
    m: usize,
    sigma: f64,
    eps: f64,
    domain: &Domain,
    n_draws: usize,
    rng: &mut R,
) -> Result<ConcentrationBound> {
    if !(eps > 0.0) {
        return Err(Error::arg(format!("radius ε = {eps} must be positive")));
    }
    let approx = rkhs_approximant(w0, kernel, m, sigma, domain)?;
    if approx.sup_error > eps {
        return Err(Error::Precondition(format!(
            "approximation error {:.3e} exceeds ε = {eps}; use a larger m or a smaller σ",
            approx.sup_error
        )));
    }
    let probe = Domain::unit(kernel.dim()).probe_grid();
    let small_ball = small_ball_mc(m, sigma, kernel, eps, n_draws, &probe, rng)?;
    let rkhs_term = approx.rkhs_norm_squared();
    Ok(ConcentrationBound {
        rkhs_term,
        small_ball,
        approximation_error: approx.sup_error,
        total: rkhs_term + small_ball.neg_log,
    })
}

/// As [`concentration_upper`] for a target that is itself in the RKHS.
pub fn concentration_upper_element<R: Rng + ?Sized>(
    h: RkhsElement<'_>,
    kernel: &Kernel,
    m: usize,
    sigma: f64,
    eps: f64,
    n_draws: usize,
    rng: &mut R,
) -> Result<ConcentrationBound> {
    if !(eps > 0.0) {
        return Err(Error::arg(format!("radius ε = {eps} must be positive")));
    }
    let norm = rkhs_norm(m, sigma, kernel, h)?;
    let probe = Domain::unit(kernel.dim()).probe_grid();
    let small_ball = small_ball_mc(m, sigma, kernel, eps, n_draws, &probe, rng)?;
    Ok(ConcentrationBound {
        rkhs_term: norm * norm,
        small_ball,
        approximation_error: 0.0,
        total: norm * norm + small_ball.neg_log,
    })
}

/// Least-squares fit of `log g(σ) ≈ c - q log σ - D (1/σ)^e (log 1/σ)^r`
/// near zero, for the bandwidth density implied by `Σ^d ~ IG(a, b)`.
#[derive(Debug, Clone, Serialize)]
pub struct GBoundReport {
    pub exponent: f64,
    pub log_power: f64,
    pub constant: f64,
    pub q: f64,
    pub coefficient: f64,
    /// `d a + 1`, the value of `q` implied by the closed form.
    pub q_expected: f64,
    pub max_abs_residual: f64,
}

/// Fit with exponent `d` and no log factor.
pub fn g_bound_check(ig_shape: f64, ig_rate: f64, d: usize, sigma_grid: &[f64]) -> Result<GBoundReport> {
    g_bound_fit(ig_shape, ig_rate, d, sigma_grid, d as f64, 0.0)
}

pub fn g_bound_fit(
    ig_shape: f64,
    ig_rate: f64,
    d: usize,
    sigma_grid: &[f64],
    exponent: f64,
    log_power: f64,
) -> Result<GBoundReport> {
    if sigma_grid.len() < 4 {
        return Err(Error::arg("need at least four bandwidths"));
    }
    if let Some(s) = sigma_grid.iter().find(|s| !(**s > 0.0 && **s <= 0.1)) {
        return Err(Error::arg(format!("bandwidth {s} outside (0, 0.1]")));
    }
    let prior = PriorConfig {
        ig_shape,
        ig_rate,
        ..PriorConfig::default_for(d)
    };
    prior.validate(d)?;
    let n = sigma_grid.len();
    let x = DMatrix::from_fn(n, 3, |i, j| {
        let inv = 1.0 / sigma_grid[i];
        match j {
            0 => 1.0,
            1 => -sigma_grid[i].ln(),
            _ => -inv.powf(exponent) * inv.ln().powf(log_power),
        }
    });
    let y = DVector::from_iterator(n, sigma_grid.iter().map(|&s| prior.log_sigma_density(s, d)));
    // columns differ in scale by orders of magnitude, so equilibrate first
    let scales: Vec<f64> = x.column_iter().map(|c| c.amax()).collect();
    let xs = DMatrix::from_fn(n, 3, |i, j| x[(i, j)] / scales[j]);
    let beta = min_norm_solve(&xs, &y, 1e-14)?;
    let coef: Vec<f64> = beta.iter().zip(&scales).map(|(b, s)| b / s).collect();
    let max_abs_residual = (&x * DVector::from_column_slice(&coef) - &y).amax();
    Ok(GBoundReport {
        exponent,
        log_power,
        constant: coef[0],
        q: coef[1],
        coefficient: coef[2],
        q_expected: d as f64 * ig_shape + 1.0,
        max_abs_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::truths::holder_profile;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn analytic_branch_reference_values() {
        let r = rate_exponents(&RateParameters::new(2.0, 1, None, 0.0).unwrap()).unwrap();
        assert_eq!(r.branch, RateBranch::Analytic);
        assert_eq!(r.eps_bar_exponent, 0.4);
        assert_relative_eq!(r.eps_bar_log_power, 1.8, max_relative = 1e-15);
        // closed form (4α + 4αd + d + d²)/(4α + 2d) for r = 0
        for (a, d) in [(0.5, 1usize), (1.0, 2), (3.0, 3), (2.5, 1)] {
            let r = rate_exponents(&RateParameters::new(a, d, None, 0.0).unwrap()).unwrap();
            let df = d as f64;
            let expected = (4.0 * a + 4.0 * a * df + df + df * df) / (4.0 * a + 2.0 * df);
            assert_relative_eq!(r.eps_bar_log_power, expected, max_relative = 1e-14);
        }
        // r = 1 + d removes the extra factor
        let r = rate_exponents(&RateParameters::new(2.0, 2, None, 3.0).unwrap()).unwrap();
        assert_relative_eq!(r.eps_bar_log_power, 3.0 / 3.0, max_relative = 1e-15);
        assert_eq!(r.eps_log_power, r.eps_bar_log_power);
    }

    #[test]
    fn finite_branch_reference_values() {
        // γ = 1, d = 1: d_γ = 4, δ_γ = 1, dδ/(2γ) = 1/2
        let p = RateParameters::new(2.0, 1, Some(1.0), 0.0).unwrap();
        assert_eq!(p.d_gamma(), 4.0);
        assert_eq!(p.delta_gamma(), 1.0);
        let r = rate_exponents(&p).unwrap();
        assert_relative_eq!(r.eps_exponent, 2.0 / 12.0, max_relative = 1e-15);
        assert_relative_eq!(r.eps_bar_exponent, 2.0 * 0.5 / (12.0 * 1.5), max_relative = 1e-15);
        assert!(!r.flagged);
    }

    #[test]
    fn finite_branch_approaches_analytic() {
        let f = rate_exponents(&RateParameters::new(2.0, 1, Some(1e6), 0.0).unwrap()).unwrap();
        assert!((f.eps_exponent - 0.4).abs() < 1e-3);
        assert!((f.eps_bar_exponent - 0.4).abs() < 1e-3);
    }

    #[test]
    fn low_regularity_is_flagged_or_rejected() {
        // γ ≤ (1 + √5)d/4 loses the rate
        let r = rate_exponents(&RateParameters::new(1.0, 2, Some(1.5), 0.0).unwrap()).unwrap();
        assert!(r.flagged);
        let r = rate_exponents(&RateParameters::new(1.0, 2, Some(1.7), 0.0).unwrap()).unwrap();
        assert!(!r.flagged);
        assert!(RateParameters::new(1.0, 2, Some(1.0), 0.0).is_err());
        assert!(RateParameters::new(0.0, 1, None, 0.0).is_err());
        assert!(RateParameters::new(1.0, 1, None, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn exponents_are_ordered(a in 0.1f64..10.0, d in 1usize..5, g_excess in 0.01f64..50.0, r in 0.0f64..5.0) {
            let gamma = d as f64 / 2.0 + g_excess;
            let r = rate_exponents(&RateParameters::new(a, d, Some(gamma), r).unwrap()).unwrap();
            prop_assert!(r.eps_exponent > 0.0 && r.eps_exponent <= 0.5);
            prop_assert!(r.eps_bar_exponent < r.eps_exponent);
            prop_assert_eq!(r.flagged, r.eps_bar_exponent <= 0.0);
        }

        #[test]
        fn analytic_exponents_match(a in 0.1f64..10.0, d in 1usize..5, r in 0.0f64..5.0) {
            let res = rate_exponents(&RateParameters::new(a, d, None, r).unwrap()).unwrap();
            prop_assert!(res.eps_exponent > 0.0 && res.eps_exponent < 0.5);
            prop_assert_eq!(res.eps_exponent, res.eps_bar_exponent);
            prop_assert!(res.eps_bar_log_power >= res.eps_log_power);
        }

        #[test]
        fn wilson_interval_contains_estimate(k in 0u64..1000, extra in 0u64..1000) {
            let n = k + extra + 1;
            let (lo, hi) = wilson_interval(k, n);
            let p = k as f64 / n as f64;
            prop_assert!(lo <= p + 1e-15 && p <= hi + 1e-15);
            prop_assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        }
    }

    #[test]
    fn single_gaussian_closed_form() {
        // m = 1, σ = 1: W(x) = Z p(x - 1) on [0, 1], largest at x = 1
        let kernel = Kernel::gaussian(1).unwrap();
        let probe = Domain::unit(1).probe_grid();
        let p0 = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let normal = Normal::standard();
        let curve = small_ball_curve(1, 1.0, &kernel, &[0.1, 0.2, 0.4], 40_000, &probe, &mut rng(1)).unwrap();
        for e in curve {
            let exact = 2.0 * normal.cdf(e.eps / p0) - 1.0;
            let (lo, hi) = wilson_interval(e.successes, e.draws);
            assert!(lo <= exact && exact <= hi, "ε = {}: {exact} not in [{lo}, {hi}]", e.eps);
            assert!(e.neg_log_lower <= -exact.ln() && -exact.ln() <= e.neg_log_upper);
        }
    }

    #[test]
    fn small_ball_limits_and_monotonicity() {
        let kernel = Kernel::gaussian(1).unwrap();
        let probe = Domain::unit(1).probe_grid();
        let big = small_ball_mc(4, 0.3, &kernel, 1e6, 1000, &probe, &mut rng(2)).unwrap();
        assert_eq!(big.successes, 1000);
        assert!(big.neg_log.abs() < 1e-15);
        let curve = small_ball_curve(4, 0.3, &kernel, &[0.5, 1.0], 20_000, &probe, &mut rng(3)).unwrap();
        assert!(curve[0].neg_log >= curve[1].neg_log);
        let tiny = small_ball_mc(4, 0.3, &kernel, 1e-6, 100, &probe, &mut rng(4)).unwrap();
        assert!(tiny.zero_successes);
        assert!(tiny.neg_log > 0.0 && tiny.neg_log_upper.is_infinite());
        assert!(small_ball_mc(4, 0.3, &kernel, 0.0, 100, &probe, &mut rng(4)).is_err());
        assert!(small_ball_mc(4, 0.3, &kernel, 1.0, 0, &probe, &mut rng(4)).is_err());
    }

    #[test]
    fn draws_do_not_depend_on_thread_count() {
        let kernel = Kernel::gaussian(1).unwrap();
        let probe = Domain::unit(1).grid(50);
        let a = sup_norm_draws(3, 0.4, &kernel, 5000, &probe, &mut rng(5)).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| sup_norm_draws(3, 0.4, &kernel, 5000, &probe, &mut rng(5)).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.len(), 5000);
    }

    #[test]
    fn shape_check_accepts_concave_curve_and_rejects_steep_one() {
        let make = |eps: f64, neg_log: f64| SmallBallEstimate {
            eps,
            draws: 1,
            successes: 1,
            probability: (-neg_log).exp(),
            neg_log,
            neg_log_lower: neg_log,
            neg_log_upper: neg_log,
            zero_successes: false,
        };
        let eps = [1.0, 0.8, 0.6, 0.4, 0.3, 0.2];
        let gentle: Vec<_> = eps.iter().map(|&e| make(e, 3.0 * (1.0 / e).ln())).collect();
        assert!(small_ball_shape_check(&gentle, 1.0, 1).unwrap().passed);
        let steep: Vec<_> = eps.iter().map(|&e| make(e, e.powi(-4))).collect();
        assert!(!small_ball_shape_check(&steep, 1.0, 1).unwrap().passed);
        assert!(small_ball_shape_check(&gentle, f64::INFINITY, 1).is_err());
    }

    #[test]
    fn zero_target_reduces_to_small_ball() {
        let kernel = Kernel::gaussian(1).unwrap();
        let w0 = SmoothFunction::zero(1, 2.0);
        let domain = Domain::interior(1);
        let c = concentration_upper(&w0, &kernel, 5, 0.3, 0.5, &domain, 4000, &mut rng(6)).unwrap();
        assert_eq!(c.rkhs_term, 0.0);
        let probe = Domain::unit(1).probe_grid();
        let sb = small_ball_mc(5, 0.3, &kernel, 0.5, 4000, &probe, &mut rng(6)).unwrap();
        assert_eq!(c.total, sb.neg_log);
    }

    #[test]
    fn single_basis_function_norm() {
        let kernel = Kernel::gaussian(1).unwrap();
        let m = 4;
        let mut w = vec![0.0; m];
        w[1] = 0.7;
        let c = concentration_upper_element(RkhsElement::Weights(&w), &kernel, m, 0.2, 0.5, 2000, &mut rng(7)).unwrap();
        assert_relative_eq!(c.rkhs_term, m as f64 * 0.49, max_relative = 1e-8);
        assert!(c.total >= c.small_ball.neg_log);
    }

    #[test]
    fn concentration_bound_decreases_with_radius() {
        let kernel = Kernel::gaussian(1).unwrap();
        let w0 = holder_profile(1, 2.5).unwrap();
        let domain = Domain::interior(1);
        let small = concentration_upper(&w0, &kernel, 30, 0.05, 0.2, &domain, 20_000, &mut rng(8)).unwrap();
        let large = concentration_upper(&w0, &kernel, 30, 0.05, 0.5, &domain, 20_000, &mut rng(8)).unwrap();
        assert!(small.total >= large.total);
        assert!(small.total >= small.small_ball.neg_log);
        let err = concentration_upper(&w0, &kernel, 3, 0.05, 1e-4, &domain, 100, &mut rng(8));
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn inverse_gamma_tail_form() {
        let grid: Vec<f64> = (1..=10).map(|i| 0.01 * i as f64).collect();
        let r = g_bound_check(2.0, 1.0, 1, &grid).unwrap();
        assert!(r.max_abs_residual <= 1e-9, "{}", r.max_abs_residual);
        assert_relative_eq!(r.q, 3.0, max_relative = 1e-9);
        assert_relative_eq!(r.coefficient, 1.0, max_relative = 1e-9);
        assert_eq!(r.q_expected, 3.0);
        // d = 2: the Jacobian shifts q to 2a + 1 and the exponent of 1/σ is 2
        let grid2: Vec<f64> = (1..=10).map(|i| 0.02 + 0.008 * i as f64).collect();
        let r = g_bound_check(2.0, 0.1, 2, &grid2).unwrap();
        assert!(r.max_abs_residual <= 1e-9, "{}", r.max_abs_residual);
        assert_relative_eq!(r.q, 5.0, max_relative = 1e-8);
        assert_relative_eq!(r.coefficient, 0.1, max_relative = 1e-8);
        let wrong = g_bound_fit(2.0, 0.1, 2, &grid2, 1.0, 0.0).unwrap();
        assert!(wrong.max_abs_residual > 1e-3);
    }

    #[test]
    fn log_power_mismatch_is_detected() {
        let grid: Vec<f64> = (1..=10).map(|i| 0.01 * i as f64).collect();
        let r = g_bound_fit(2.0, 1.0, 1, &grid, 1.0, 1.0).unwrap();
        assert!(r.max_abs_residual > 1e-3, "{}", r.max_abs_residual);
        assert!(g_bound_check(2.0, 1.0, 1, &[0.01, 0.02, 0.2, 0.05]).is_err());
    }
}
