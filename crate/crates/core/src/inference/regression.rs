//! Gaussian regression `y = Φ z + ε`, `z ~ N(0, v I)`, `ε ~ N(0, τ² I)`.
//!
//! With `A = I/v + ΦᵀΦ/τ²` and `b = Φᵀy/τ²` the marginal likelihood is
//!
//! ```text
//! log p(y) = -n/2 log 2π - n log τ - K/2 log v - 1/2 log det A
//!            - 1/2 (yᵀy/τ² - bᵀA⁻¹b)
//! ```
//!
//! which only involves `K × K` matrices, and `z | y ~ N(A⁻¹b, A⁻¹)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use super::samplers::{metropolis_accept, propose_log_walk, propose_m, propose_reflected, Adapter};
use super::{AcceptanceRates, ChainState, Init, McmcConfig, Model, PosteriorChain, RegressionData};
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::mixture::{basis_matrix, PriorConfig};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `ΦᵀΦ`, `Φᵀy` and `yᵀy` for one basis.
#[derive(Debug, Clone)]
pub(crate) struct Sufficient {
    gram: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
    n: usize,
}

impl Sufficient {
    pub(crate) fn new(m: usize, sigma: f64, kernel: &Kernel, data: &RegressionData) -> Result<Self> {
        let phi = basis_matrix(m, sigma, kernel, data.points())?.matrix;
        let y = DVector::from_column_slice(data.y());
        Ok(Sufficient {
            gram: phi.tr_mul(&phi),
            xty: phi.tr_mul(&y),
            yty: y.norm_squared(),
            n: data.n(),
        })
    }
}

/// Cholesky factorization of a symmetric matrix with the jitter ladder
/// `1e-10, 1e-9, …, 1e-4` times the mean diagonal.
pub(crate) fn cholesky_with_jitter(a: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let k = a.nrows();
    let scale = a.trace() / k.max(1) as f64;
    if let Some(c) = a.clone().cholesky() {
        return Ok(c);
    }
    let mut rel = 1e-10;
    while rel <= 1.0000001e-4 {
        let mut b = a.clone();
        for i in 0..k {
            b[(i, i)] += rel * scale;
        }
        if let Some(c) = b.cholesky() {
            log::debug!("cholesky needed jitter {:e}", rel * scale);
            return Ok(c);
        }
        rel *= 10.0;
    }
    Err(Error::Numerical {
        dim: k,
        jitter: 1e-4 * scale,
        scale,
    })
}

/// Factorized conditional model at `(m, σ, τ)`.
#[derive(Debug, Clone)]
pub(crate) struct Conditional {
    chol: Cholesky<f64, Dyn>,
    mean: DVector<f64>,
    log_marginal: f64,
}

impl Conditional {
    pub(crate) fn new(s: &Sufficient, tau: f64, prior_variance: f64) -> Result<Self> {
        let k = s.gram.nrows();
        let t2 = tau * tau;
        let mut a = &s.gram / t2;
        for i in 0..k {
            a[(i, i)] += 1.0 / prior_variance;
        }
        let chol = cholesky_with_jitter(a)?;
        let b = &s.xty / t2;
        let mean = chol.solve(&b);
        let log_det_a: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let quad = s.yty / t2 - b.dot(&mean);
        let n = s.n as f64;
        let log_marginal =
            -0.5 * n * LN_2PI - n * tau.ln() - 0.5 * k as f64 * prior_variance.ln() - 0.5 * log_det_a - 0.5 * quad;
        Ok(Conditional {
            chol,
            mean,
            log_marginal,
        })
    }

    fn posterior(&self) -> WeightPosterior {
        WeightPosterior {
            mean: self.mean.clone(),
            factor: self.chol.l(),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        draw(&self.mean, &self.chol.l(), rng)
    }
}

fn draw<R: Rng + ?Sized>(mean: &DVector<f64>, l: &DMatrix<f64>, rng: &mut R) -> Vec<f64> {
    let eps = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let offset = l
        .tr_solve_lower_triangular(&eps)
        .expect("cholesky factor has a positive diagonal");
    (mean + offset).as_slice().to_vec()
}

/// `N(mean, A⁻¹)` with `A = L Lᵀ`; draws are `mean + L^{-T} ε`.
#[derive(Debug, Clone)]
pub struct WeightPosterior {
    pub mean: DVector<f64>,
    /// Lower Cholesky factor `L` of the posterior precision `A`.
    pub factor: DMatrix<f64>,
}

impl WeightPosterior {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        draw(&self.mean, &self.factor, rng)
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let precision = &self.factor * self.factor.transpose();
        precision.cholesky().expect("precision is positive definite").inverse()
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::arg(format!(
            "noise level τ must be positive and finite, got {tau}"
        )));
    }
    Ok(())
}

/// `log p(y | m, σ, τ)` with the weights integrated out against `N(0, I)`.
pub fn regression_log_marginal(m: usize, sigma: f64, tau: f64, data: &RegressionData, kernel: &Kernel) -> Result<f64> {
    regression_log_marginal_with(m, sigma, tau, data, kernel, 1.0)
}

/// As [`regression_log_marginal`] with weight prior `N(0, v I)`; `v = 0` gives
/// the iid `N(0, τ²)` likelihood of `y`.
pub fn regression_log_marginal_with(
    m: usize,
    sigma: f64,
    tau: f64,
    data: &RegressionData,
    kernel: &Kernel,
    prior_variance: f64,
) -> Result<f64> {
    check_tau(tau)?;
    if !(prior_variance >= 0.0) {
        return Err(Error::arg("prior variance must be nonnegative"));
    }
    if prior_variance == 0.0 {
        let n = data.n() as f64;
        let yty: f64 = data.y().iter().map(|v| v * v).sum();
        return Ok(-0.5 * n * LN_2PI - n * tau.ln() - 0.5 * yty / (tau * tau));
    }
    let s = Sufficient::new(m, sigma, kernel, data)?;
    Ok(Conditional::new(&s, tau, prior_variance)?.log_marginal)
}

/// Exact conditional posterior of the weights at `(m, σ, τ)`.
pub fn regression_posterior_weights(
    m: usize,
    sigma: f64,
    tau: f64,
    data: &RegressionData,
    kernel: &Kernel,
) -> Result<WeightPosterior> {
    check_tau(tau)?;
    let s = Sufficient::new(m, sigma, kernel, data)?;
    Ok(Conditional::new(&s, tau, 1.0)?.posterior())
}

/// Unnormalized `log Π(m, σ, τ | y)`; `-∞` outside the prior support.
pub fn regression_log_posterior(
    m: usize,
    sigma: f64,
    tau: f64,
    data: &RegressionData,
    prior: &PriorConfig,
    kernel: &Kernel,
) -> Result<f64> {
    let dim = kernel.dim();
    if m == 0 || m > prior.m_max || !prior.sigma_in_clip(sigma) || !prior.tau_in_interval(tau) {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(regression_log_marginal(m, sigma, tau, data, kernel)?
        + prior.log_prior_m(m)
        + prior.log_sigma_density(sigma, dim)
        + prior.log_tau_density(tau))
}

struct Current {
    m: usize,
    sigma: f64,
    tau: f64,
    suff: Sufficient,
    cond: Conditional,
    lp: f64,
}

fn log_prior(prior: &PriorConfig, dim: usize, m: usize, sigma: f64, tau: f64) -> f64 {
    prior.log_prior_m(m) + prior.log_sigma_density(sigma, dim) + prior.log_tau_density(tau)
}

fn state_at(
    m: usize,
    sigma: f64,
    tau: f64,
    data: &RegressionData,
    prior: &PriorConfig,
    kernel: &Kernel,
) -> Result<Current> {
    let suff = Sufficient::new(m, sigma, kernel, data)?;
    let cond = Conditional::new(&suff, tau, 1.0)?;
    let lp = cond.log_marginal + log_prior(prior, kernel.dim(), m, sigma, tau);
    Ok(Current {
        m,
        sigma,
        tau,
        suff,
        cond,
        lp,
    })
}

fn initial_state<R: Rng + ?Sized>(
    data: &RegressionData,
    prior: &PriorConfig,
    kernel: &Kernel,
    init: Init,
    rng: &mut R,
) -> Result<Current> {
    match init {
        Init::Prior => {
            let m = prior.sample_m(rng);
            let sigma = prior
                .sample_sigma_unclipped(kernel.dim(), rng)
                .clamp(prior.sigma_lo, prior.sigma_hi);
            let tau = prior.tau_lo + rng.random::<f64>() * (prior.tau_hi - prior.tau_lo);
            state_at(m, sigma, tau, data, prior, kernel)
        }
        Init::Scan => {
            let taus: Vec<f64> = (0..5)
                .map(|i| prior.tau_lo * (prior.tau_hi / prior.tau_lo).powf((i as f64 + 0.5) / 5.0))
                .collect();
            let mut best: Option<(f64, usize, f64, f64)> = None;
            for m in 1..=prior.m_max {
                let sigma = (1.0 / m as f64).clamp(prior.sigma_lo, prior.sigma_hi);
                let suff = Sufficient::new(m, sigma, kernel, data)?;
                for &tau in &taus {
                    let lp =
                        Conditional::new(&suff, tau, 1.0)?.log_marginal + log_prior(prior, kernel.dim(), m, sigma, tau);
                    if best.is_none_or(|b| lp > b.0) {
                        best = Some((lp, m, sigma, tau));
                    }
                }
            }
            let (_, m, sigma, tau) = best.expect("m_max >= 1");
            state_at(m, sigma, tau, data, prior, kernel)
        }
    }
}

/// Metropolis-within-Gibbs over `(m, σ, τ)` targeting the marginal posterior,
/// with `z` drawn from its exact conditional at every recorded state.
pub fn fit_regression<R: Rng + ?Sized>(
    data: &RegressionData,
    prior: &PriorConfig,
    kernel: &Kernel,
    mcmc: &McmcConfig,
    rng: &mut R,
) -> Result<PosteriorChain> {
    let dim = kernel.dim();
    if data.points().dim() != dim {
        return Err(Error::arg("data and kernel dimensions differ"));
    }
    prior.validate(dim)?;
    mcmc.validate()?;
    let mut cur = initial_state(data, prior, kernel, mcmc.init, rng)?;
    let mut ad_sigma = Adapter::new(mcmc.sigma_step, mcmc.target_acceptance, mcmc.adapt_window);
    let mut ad_tau = Adapter::new(mcmc.tau_step, mcmc.target_acceptance, mcmc.adapt_window);
    let (mut m_proposed, mut m_accepted) = (0usize, 0usize);
    let mut states = Vec::with_capacity(mcmc.iterations / mcmc.thin);
    let mut burn_in_index = 0;

    for it in 0..mcmc.iterations {
        let burning = it < mcmc.burn_in;

        let (sigma, log_q) = propose_log_walk(cur.sigma, ad_sigma.step, rng);
        let mut accepted = false;
        if prior.sigma_in_clip(sigma) {
            let prop = state_at(cur.m, sigma, cur.tau, data, prior, kernel)?;
            if metropolis_accept(prop.lp - cur.lp + log_q, rng) {
                cur = prop;
                accepted = true;
            }
        }
        ad_sigma.record(accepted, burning);

        let m = propose_m(cur.m, prior.m_max, rng);
        if m != cur.m {
            m_proposed += 1;
            let prop = state_at(m, cur.sigma, cur.tau, data, prior, kernel)?;
            if metropolis_accept(prop.lp - cur.lp, rng) {
                cur = prop;
                m_accepted += 1;
            }
        }

        let tau = propose_reflected(cur.tau, ad_tau.step, prior.tau_lo, prior.tau_hi, rng);
        let cond = Conditional::new(&cur.suff, tau, 1.0)?;
        let lp = cond.log_marginal + log_prior(prior, dim, cur.m, cur.sigma, tau);
        let accepted = metropolis_accept(lp - cur.lp, rng);
        if accepted {
            cur.tau = tau;
            cur.cond = cond;
            cur.lp = lp;
        }
        ad_tau.record(accepted, burning);

        if it + 1 == mcmc.burn_in && mcmc.burn_in >= mcmc.adapt_window && ad_sigma.burn_in_accepted == 0 {
            return Err(Error::Diagnostics(format!(
                "no bandwidth proposal accepted during {} burn-in iterations (final step {:e})",
                mcmc.burn_in, ad_sigma.step
            )));
        }
        if (it + 1) % mcmc.thin == 0 {
            if it < mcmc.burn_in {
                burn_in_index += 1;
            }
            states.push(ChainState {
                iteration: it + 1,
                m: cur.m,
                sigma: cur.sigma,
                tau: Some(cur.tau),
                z: cur.cond.sample(rng),
            });
        }
    }

    Ok(PosteriorChain {
        model: Model::Regression,
        kernel: kernel.clone(),
        dim,
        states,
        burn_in_index,
        acceptance: AcceptanceRates {
            sigma: ad_sigma.rate(),
            m: if m_proposed == 0 {
                0.0
            } else {
                m_accepted as f64 / m_proposed as f64
            },
            tau: Some(ad_tau.rate()),
            ess_evaluations: None,
            final_sigma_step: ad_sigma.step,
            final_tau_step: Some(ad_tau.step),
        },
        seed: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::samplers::elliptical_slice;
    use crate::quadrature::{Domain, Points};
    use crate::stats::batch_means_se;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_data(n: usize, seed: u64) -> RegressionData {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..n).map(|_| 0.1 + 0.8 * rng.random::<f64>()).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| (6.0 * x).sin() + 0.3 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        RegressionData::new(Points::from_scalars(&xs), ys, Domain::interior(1)).unwrap()
    }

    /// Gaussian log density of `y` with covariance `τ² I + v Φ Φᵀ`, assembled densely.
    fn dense_log_marginal(m: usize, sigma: f64, tau: f64, v: f64, data: &RegressionData, kernel: &Kernel) -> f64 {
        let phi = basis_matrix(m, sigma, kernel, data.points()).unwrap().matrix;
        let n = data.n();
        let cov = &phi * phi.transpose() * v + DMatrix::identity(n, n) * tau * tau;
        let chol = cov.cholesky().unwrap();
        let y = DVector::from_column_slice(data.y());
        let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        -0.5 * n as f64 * LN_2PI - 0.5 * log_det - 0.5 * y.dot(&chol.solve(&y))
    }

    #[test]
    fn single_observation_closed_form() {
        let k = Kernel::gaussian(1).unwrap();
        let data = RegressionData::new(Points::from_scalars(&[0.4]), vec![0.7], Domain::interior(1)).unwrap();
        let phi = basis_matrix(3, 0.2, &k, data.points()).unwrap().matrix;
        let var = 0.25 + phi.norm_squared();
        let expected = -0.5 * (2.0 * std::f64::consts::PI * var).ln() - 0.49 / (2.0 * var);
        assert_relative_eq!(
            regression_log_marginal(3, 0.2, 0.5, &data, &k).unwrap(),
            expected,
            max_relative = 1e-12
        );
    }

    #[test]
    fn zero_prior_variance_is_iid_noise() {
        let k = Kernel::gaussian(1).unwrap();
        let data = random_data(20, 5);
        let tau: f64 = 0.4;
        let expected: f64 = data
            .y()
            .iter()
            .map(|y| -0.5 * (2.0 * std::f64::consts::PI * tau * tau).ln() - y * y / (2.0 * tau * tau))
            .sum();
        assert_relative_eq!(
            regression_log_marginal_with(5, 0.1, tau, &data, &k, 0.0).unwrap(),
            expected,
            max_relative = 1e-13
        );
        // small variances approach the limit continuously
        let near = regression_log_marginal_with(5, 0.1, tau, &data, &k, 1e-12).unwrap();
        assert_relative_eq!(near, expected, max_relative = 1e-9);
    }

    #[test]
    fn woodbury_matches_dense_covariance() {
        let k = Kernel::gaussian(1).unwrap();
        for seed in 0..10 {
            let data = random_data(50, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let sigma = 0.02 + 0.5 * rng.random::<f64>();
            let tau = 0.05 + rng.random::<f64>();
            let v = if seed % 2 == 0 { 1.0 } else { 0.3 };
            let fast = regression_log_marginal_with(8, sigma, tau, &data, &k, v).unwrap();
            let dense = dense_log_marginal(8, sigma, tau, v, &data, &k);
            assert_relative_eq!(fast, dense, max_relative = 1e-10);
        }
    }

    #[test]
    fn posterior_mean_is_ridge_solution() {
        let k = Kernel::gaussian(1).unwrap();
        let data = random_data(40, 9);
        let (m, sigma, tau) = (6, 0.15, 0.3);
        let post = regression_posterior_weights(m, sigma, tau, &data, &k).unwrap();
        let phi = basis_matrix(m, sigma, &k, data.points()).unwrap().matrix;
        let y = DVector::from_column_slice(data.y());
        let normal = phi.transpose() * &phi + DMatrix::identity(m, m) * tau * tau;
        let ridge = normal.lu().solve(&(phi.transpose() * y)).unwrap();
        for (a, b) in post.mean.iter().zip(ridge.iter()) {
            assert_relative_eq!(a, b, max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_response_and_huge_noise_limits() {
        let k = Kernel::gaussian(1).unwrap();
        let pts = Points::from_scalars(&[0.2, 0.5, 0.8]);
        let data = RegressionData::new(pts.clone(), vec![0.0; 3], Domain::interior(1)).unwrap();
        let post = regression_posterior_weights(4, 0.2, 0.1, &data, &k).unwrap();
        assert!(post.mean.iter().all(|v| *v == 0.0));
        let data = RegressionData::new(pts, vec![1.0, -2.0, 0.5], Domain::interior(1)).unwrap();
        let post = regression_posterior_weights(4, 0.2, 1e6, &data, &k).unwrap();
        let cov = post.covariance();
        assert!((cov - DMatrix::identity(4, 4)).abs().max() < 1e-9);
        assert!(post.mean.abs().max() < 1e-9);
    }

    #[test]
    fn exact_posterior_matches_weight_only_chain() {
        let k = Kernel::gaussian(1).unwrap();
        let data = random_data(30, 21);
        let (m, sigma, tau) = (5, 0.15, 0.3);
        let post = regression_posterior_weights(m, sigma, tau, &data, &k).unwrap();
        let phi = basis_matrix(m, sigma, &k, data.points()).unwrap().matrix;
        let y = DVector::from_column_slice(data.y());
        let ll = |z: &DVector<f64>| -0.5 * (&y - &phi * z).norm_squared() / (tau * tau);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut z = DVector::zeros(m);
        let mut cur = ll(&z);
        let steps = 200_000;
        let mut trace = vec![Vec::with_capacity(steps); m];
        for _ in 0..steps {
            let nu = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
            let (c, s, new) = elliptical_slice(cur, |c, s| ll(&(&z * c + &nu * s)), &mut rng);
            z = &z * c + &nu * s;
            cur = new;
            for (t, v) in trace.iter_mut().zip(z.iter()) {
                t.push(*v);
            }
        }
        for (j, (t, target)) in trace.iter().zip(post.mean.iter()).enumerate() {
            let mc: f64 = t.iter().sum::<f64>() / steps as f64;
            let se = batch_means_se(t, 50);
            assert!(
                (mc - target).abs() <= 3.0 * se,
                "weight {j}: {mc} vs {target} (se {se})"
            );
        }
    }

    #[test]
    fn posterior_draws_have_the_stated_covariance() {
        let k = Kernel::gaussian(1).unwrap();
        let data = random_data(25, 3);
        let post = regression_posterior_weights(3, 0.3, 0.5, &data, &k).unwrap();
        let cov = post.covariance();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let draws: Vec<Vec<f64>> = (0..100_000).map(|_| post.sample(&mut rng)).collect();
        for i in 0..3 {
            for j in 0..3 {
                let c: f64 = draws
                    .iter()
                    .map(|z| (z[i] - post.mean[i]) * (z[j] - post.mean[j]))
                    .sum::<f64>()
                    / draws.len() as f64;
                assert!((c - cov[(i, j)]).abs() < 0.02 * (cov[(i, i)] * cov[(j, j)]).sqrt());
            }
        }
    }

    #[test]
    fn chain_is_deterministic_and_records_tau() {
        let k = Kernel::gaussian(1).unwrap();
        let data = random_data(40, 4);
        let prior = PriorConfig::default_for(1);
        let mcmc = McmcConfig {
            iterations: 600,
            burn_in: 200,
            thin: 5,
            ..McmcConfig::default()
        };
        let a = fit_regression(&data, &prior, &k, &mcmc, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = fit_regression(&data, &prior, &k, &mcmc, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.states.len(), 120);
        assert_eq!(a.burn_in_index, 40);
        assert!(a.states.iter().all(|s| s.tau.is_some() && s.z.len() == s.m));
        assert!(a.acceptance.sigma > 0.0);
    }

    #[test]
    fn jitter_ladder_gives_up_on_indefinite_matrices() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(cholesky_with_jitter(a), Err(Error::Numerical { .. })));
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(cholesky_with_jitter(singular).is_ok());
    }
}
