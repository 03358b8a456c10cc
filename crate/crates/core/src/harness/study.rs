//! Empirical contraction-rate studies: repeated fits over a grid of sample
//! sizes and a least-squares slope of log error against log n.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{Aggregate, ExperimentConfig, Scenario};
use super::data::{
    class_probability, generate_classification, generate_density_sample, generate_regression, ExpDensity,
};
use crate::error::{Error, Result};
use crate::inference::{fit_classification, fit_density, fit_regression, hellinger_values, predict, AcceptanceRates};
use crate::kernels::Kernel;
use crate::stats::{fit_line, mean, median, LineFit};
use crate::verification::{rate_exponents, RateParameters};

/// Largest tolerated fraction of failed replicates.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;

/// Generator for the task `(n, replicate)`, keyed by a hash of
/// `(seed, n, replicate)` so that tasks are independent of scheduling.
pub fn task_rng(seed: u64, n: usize, replicate: usize) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((n as u64).to_le_bytes());
    h.update((replicate as u64).to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplicateRecord {
    pub n: usize,
    pub replicate: usize,
    /// RMSE (regression), Hellinger distance (density) or empirical `L2`
    /// error of the class probability (classification).
    pub error: Option<f64>,
    pub failure: Option<String>,
    pub acceptance: Option<AcceptanceRates>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateStudyResult {
    pub scenario: Scenario,
    pub records: Vec<ReplicateRecord>,
    /// `(n, aggregated log error)` over the successful replicates.
    pub log_errors: Vec<(usize, f64)>,
    /// Slope of log error on log n; present with at least four sample sizes.
    pub fit: Option<LineFit>,
    /// `-ā` with `ā` the exponent of the contraction rate.
    pub theoretical_slope: f64,
    pub failures: usize,
}

impl RateStudyResult {
    /// Fails when more than [`MAX_FAILURE_FRACTION`] of the replicates failed.
    pub fn check(&self) -> Result<()> {
        let total = self.records.len();
        if total > 0 && self.failures as f64 > MAX_FAILURE_FRACTION * total as f64 {
            return Err(Error::Study {
                failed: self.failures,
                total,
            });
        }
        Ok(())
    }
}

/// Error of the posterior mean for one generated data set.
pub fn replicate_error(
    config: &ExperimentConfig,
    kernel: &Kernel,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, AcceptanceRates)> {
    let e = &config.experiment;
    let domain = config.domain()?;
    let prior = config.prior();
    let w0 = e.truth.build(e.dim, e.alpha)?;
    match e.scenario {
        Scenario::Regression => {
            let data = generate_regression(|x| w0.eval(x), e.tau0, n, &domain, rng)?;
            let chain = fit_regression(&data, &prior, kernel, &config.mcmc, rng)?;
            let summary = predict(&chain, data.points(), e.level)?;
            let sq: Vec<f64> = data
                .points()
                .iter()
                .zip(&summary.mean)
                .map(|(x, m)| (m - w0.eval(x)).powi(2))
                .collect();
            Ok((mean(&sq).sqrt(), chain.acceptance))
        }
        Scenario::Density => {
            let f0 = ExpDensity::new(w0, &domain)?;
            let sample = generate_density_sample(|x| f0.eval(x), f0.envelope(), n, &domain, rng)?;
            let chain = fit_density(&sample.data, &prior, kernel, &config.mcmc, rng)?;
            let rule = domain.trapezoid(domain.default_resolution());
            let summary = predict(&chain, &rule.nodes, e.level)?;
            let truth: Vec<f64> = rule.nodes.iter().map(|x| f0.eval(x)).collect();
            let dist = hellinger_values(&summary.mean, &truth, &rule.weights)?;
            Ok((dist, chain.acceptance))
        }
        Scenario::Classification => {
            let r0 = class_probability(&w0, e.link, e.gain);
            let data = generate_classification(&r0, n, &domain, rng)?;
            let chain = fit_classification(&data, e.link, &prior, kernel, &config.mcmc, rng)?;
            let summary = predict(&chain, data.points(), e.level)?;
            let sq: Vec<f64> = data
                .points()
                .iter()
                .zip(&summary.mean)
                .map(|(x, p)| (p - r0(x)).powi(2))
                .collect();
            Ok((mean(&sq).sqrt(), chain.acceptance))
        }
    }
}

/// Runs every `(n, replicate)` task and fits the slope. Replicate failures
/// are recorded, not raised; see [`RateStudyResult::check`].
pub fn run_rate_study(config: &ExperimentConfig) -> Result<RateStudyResult> {
    config.validate()?;
    let e = &config.experiment;
    let kernel = config.kernel()?;
    let tasks: Vec<(usize, usize)> = e
        .sample_sizes
        .iter()
        .flat_map(|&n| (0..e.replicates).map(move |r| (n, r)))
        .collect();
    let records: Vec<ReplicateRecord> = tasks
        .par_iter()
        .map(|&(n, replicate)| {
            let mut rng = task_rng(e.seed, n, replicate);
            match replicate_error(config, &kernel, n, &mut rng) {
                Ok((error, acceptance)) => {
                    log::info!("n = {n}, replicate {replicate}: error {error:.4e}");
                    ReplicateRecord {
                        n,
                        replicate,
                        error: Some(error),
                        failure: None,
                        acceptance: Some(acceptance),
                    }
                }
                Err(err) => {
                    log::warn!("n = {n}, replicate {replicate} failed: {err}");
                    ReplicateRecord {
                        n,
                        replicate,
                        error: None,
                        failure: Some(err.to_string()),
                        acceptance: None,
                    }
                }
            }
        })
        .collect();
    let failures = records.iter().filter(|r| r.error.is_none()).count();
    let log_errors: Vec<(usize, f64)> = e
        .sample_sizes
        .iter()
        .filter_map(|&n| {
            let logs: Vec<f64> = records
                .iter()
                .filter(|r| r.n == n)
                .filter_map(|r| r.error)
                .map(f64::ln)
                .collect();
            if logs.is_empty() {
                return None;
            }
            let agg = match e.aggregate {
                Aggregate::Mean => mean(&logs),
                Aggregate::Median => median(&logs),
            };
            Some((n, agg))
        })
        .collect();
    let fit = (log_errors.len() >= 4).then(|| {
        let x: Vec<f64> = log_errors.iter().map(|(n, _)| (*n as f64).ln()).collect();
        let y: Vec<f64> = log_errors.iter().map(|(_, v)| *v).collect();
        fit_line(&x, &y)
    });
    let gamma = Some(kernel.regularity().gamma()).filter(|g| g.is_finite());
    let rates = rate_exponents(&RateParameters::new(e.alpha, e.dim, gamma, 0.0)?)?;
    Ok(RateStudyResult {
        scenario: e.scenario,
        records,
        log_errors,
        fit,
        theoretical_slope: -rates.eps_bar_exponent,
        failures,
    })
}

/// [`run_rate_study`] followed by the failure check.
pub fn rate_study(config: &ExperimentConfig) -> Result<RateStudyResult> {
    let result = run_rate_study(config)?;
    result.check()?;
    Ok(result)
}
