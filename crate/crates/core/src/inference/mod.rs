//! Posterior computation for Gaussian regression, density estimation and
//! binary classification under the mixture prior.
//!
//! In regression the weights `z` are integrated out analytically and the chain
//! runs over `(m, σ, τ)`, with `z` drawn exactly from its conditional posterior
//! at recorded states. Density estimation and classification have no conjugate
//! structure; their chains update `z` by elliptical slice sampling and change
//! `m` with fresh prior draws of `z`.

mod latent;
pub mod link;
pub mod metrics;
pub mod predict;
pub mod regression;
pub mod samplers;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::mixture::MixtureFunction;
use crate::quadrature::{Domain, Points};

pub use latent::{fit_classification, fit_density, log_normalizer};
pub use link::Link;
pub use metrics::{empirical_l2_error, hellinger, hellinger_values};
pub use predict::{predict, PredictiveSummary};
pub use regression::{
    fit_regression, regression_log_marginal, regression_log_marginal_with, regression_posterior_weights,
    WeightPosterior,
};

fn check_in_domain(points: &Points, domain: &Domain) -> Result<()> {
    if points.dim() != domain.dim {
        return Err(Error::arg(format!(
            "points of dimension {} for a domain of dimension {}",
            points.dim(),
            domain.dim
        )));
    }
    if let Some((i, x)) = points.iter().enumerate().find(|(_, x)| !domain.contains(x)) {
        return Err(Error::arg(format!(
            "point {i} at {x:?} lies outside [{}, {}]^{}",
            domain.lo, domain.hi, domain.dim
        )));
    }
    Ok(())
}

/// Responses `y_i = θ(x_i) + ε_i` at design points in `X`.
#[derive(Debug, Clone)]
pub struct RegressionData {
    points: Points,
    y: Vec<f64>,
    domain: Domain,
}

impl RegressionData {
    pub fn new(points: Points, y: Vec<f64>, domain: Domain) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::arg("regression needs at least one observation"));
        }
        if points.len() != y.len() {
            return Err(Error::arg(format!(
                "{} design points but {} responses",
                points.len(),
                y.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("responses must be finite"));
        }
        check_in_domain(&points, &domain)?;
        Ok(RegressionData { points, y, domain })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }
}

/// A sample from a density on `X`.
#[derive(Debug, Clone)]
pub struct DensityData {
    points: Points,
    domain: Domain,
}

impl DensityData {
    pub fn new(points: Points, domain: Domain) -> Result<Self> {
        check_in_domain(&points, &domain)?;
        Ok(DensityData { points, domain })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }
}

/// Covariates in `X` with binary labels.
#[derive(Debug, Clone)]
pub struct ClassificationData {
    points: Points,
    labels: Vec<bool>,
    domain: Domain,
}

impl ClassificationData {
    pub fn new(points: Points, labels: Vec<bool>, domain: Domain) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::arg(format!(
                "{} covariates but {} labels",
                points.len(),
                labels.len()
            )));
        }
        check_in_domain(&points, &domain)?;
        Ok(ClassificationData { points, labels, domain })
    }

    /// Labels from numeric values, which must be exactly 0 or 1.
    pub fn from_numeric(points: Points, labels: &[f64], domain: Domain) -> Result<Self> {
        let labels = labels
            .iter()
            .map(|&v| {
                if v == 0.0 || v == 1.0 {
                    Ok(v == 1.0)
                } else {
                    Err(Error::arg(format!("label {v} is not binary")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(points, labels, domain)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }
}

/// How the chain picks its first state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    /// Regression: the best `(m, σ = 1/m, τ)` of a coarse scan of the
    /// marginal posterior. Latent models: `m = ⌈m_max/3⌉`, `σ = 1/m`, `z = 0`.
    Scan,
    /// A draw from the prior.
    Prior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    /// Record every `thin`-th state.
    pub thin: usize,
    /// Iterations between step-size updates during burn-in.
    pub adapt_window: usize,
    pub target_acceptance: f64,
    /// Initial standard deviation of the log-scale walk on `σ`.
    pub sigma_step: f64,
    /// Initial standard deviation of the walk on `τ`.
    pub tau_step: f64,
    pub init: Init,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            iterations: 20_000,
            burn_in: 5_000,
            thin: 10,
            adapt_window: 50,
            target_acceptance: 0.3,
            sigma_step: 0.3,
            tau_step: 0.05,
            init: Init::Scan,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "need 0 <= burn_in < iterations, got burn_in = {} and iterations = {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 || self.adapt_window == 0 {
            return Err(Error::Config("thin and adapt_window must be positive".into()));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::Config("target_acceptance must lie in (0, 1)".into()));
        }
        if !(self.sigma_step > 0.0 && self.tau_step > 0.0) {
            return Err(Error::Config("proposal steps must be positive".into()));
        }
        Ok(())
    }
}

/// Statistical setting of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum Model {
    Regression,
    /// `e^W / ∫_X e^W`, normalized with the trapezoid rule on `per_axis`
    /// points per axis of `domain`.
    Density {
        domain: Domain,
        per_axis: usize,
    },
    Classification {
        link: Link,
    },
}

impl Model {
    pub fn tag(&self) -> &'static str {
        match self {
            Model::Regression => "regression",
            Model::Density { .. } => "density",
            Model::Classification { .. } => "classification",
        }
    }
}

/// A recorded state. `tau` is present exactly for regression chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub iteration: usize,
    pub m: usize,
    pub sigma: f64,
    pub tau: Option<f64>,
    pub z: Vec<f64>,
}

impl ChainState {
    pub fn mixture(&self, dim: usize) -> Result<MixtureFunction> {
        MixtureFunction::new(self.m, self.sigma, dim, self.z.clone())
    }
}

/// Acceptance rates per move; `None` when the move is not part of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRates {
    pub sigma: f64,
    pub m: f64,
    pub tau: Option<f64>,
    /// Mean number of likelihood evaluations per elliptical slice update.
    pub ess_evaluations: Option<f64>,
    pub final_sigma_step: f64,
    pub final_tau_step: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PosteriorChain {
    pub model: Model,
    pub kernel: Kernel,
    pub dim: usize,
    /// Every `thin`-th state, burn-in included.
    pub states: Vec<ChainState>,
    /// Index into `states` of the first state after burn-in.
    pub burn_in_index: usize,
    pub acceptance: AcceptanceRates,
    pub seed: Option<u64>,
}

impl PosteriorChain {
    /// States recorded after burn-in.
    pub fn kept(&self) -> &[ChainState] {
        &self.states[self.burn_in_index..]
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}
