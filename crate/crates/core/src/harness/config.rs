//! Experiment configuration, read from TOML files with one table per section.
//! Every key is optional; unknown keys are errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::approximation::Correction;
use crate::error::{Error, Result};
use crate::inference::{Link, McmcConfig};
use crate::kernels::{Kernel, KernelChoice};
use crate::mixture::PriorConfig;
use crate::quadrature::Domain;
use crate::truths::Truth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    #[default]
    Regression,
    Density,
    Classification,
}

/// How replicate errors are combined per sample size before the slope fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    #[default]
    Mean,
    Median,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub scenario: Scenario,
    pub dim: usize,
    pub kernel: KernelChoice,
    pub link: Link,
    /// Regression function, log-density shape or classification field.
    pub truth: Truth,
    pub alpha: f64,
    /// Noise level of generated regression data.
    pub tau0: f64,
    /// Classification truth `r0 = Ψ(gain · w0)`.
    pub gain: f64,
    pub domain_lo: f64,
    pub domain_hi: f64,
    pub sample_sizes: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub aggregate: Aggregate,
    /// Credible level of predictive bands.
    pub level: f64,
    /// Prediction grid points per axis.
    pub grid: usize,
    pub output: PathBuf,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            scenario: Scenario::Regression,
            dim: 1,
            kernel: KernelChoice::Gaussian,
            link: Link::Logistic,
            truth: Truth::Holder,
            alpha: 2.0,
            tau0: 0.1,
            gain: 1.0,
            domain_lo: 0.1,
            domain_hi: 0.9,
            sample_sizes: vec![100, 200, 400, 800, 1600],
            replicates: 20,
            seed: 1,
            aggregate: Aggregate::Mean,
            level: 0.9,
            grid: 101,
            output: PathBuf::from("results"),
        }
    }
}

/// Overrides of the dimension-dependent prior defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PriorSection {
    pub s: Option<f64>,
    pub m_max: Option<usize>,
    pub ig_shape: Option<f64>,
    pub ig_rate: Option<f64>,
    pub tau_lo: Option<f64>,
    pub tau_hi: Option<f64>,
    pub sigma_lo: Option<f64>,
    pub sigma_hi: Option<f64>,
}

impl PriorSection {
    pub fn resolve(&self, dim: usize) -> PriorConfig {
        let d = PriorConfig::default_for(dim);
        PriorConfig {
            s: self.s.unwrap_or(d.s),
            m_max: self.m_max.unwrap_or(d.m_max),
            ig_shape: self.ig_shape.unwrap_or(d.ig_shape),
            ig_rate: self.ig_rate.unwrap_or(d.ig_rate),
            tau_lo: self.tau_lo.unwrap_or(d.tau_lo),
            tau_hi: self.tau_hi.unwrap_or(d.tau_hi),
            sigma_lo: self.sigma_lo.unwrap_or(d.sigma_lo),
            sigma_hi: self.sigma_hi.unwrap_or(d.sigma_hi),
        }
    }
}

/// Input data of the `fit-*` commands. Without a path, `n` points are
/// generated from the experiment's truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub path: Option<PathBuf>,
    pub n: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection { path: None, n: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplePriorSection {
    pub draws: usize,
}

impl Default for SamplePriorSection {
    fn default() -> Self {
        SamplePriorSection { draws: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApproxSection {
    pub sigmas: Vec<f64>,
    pub correction: Correction,
}

impl Default for ApproxSection {
    fn default() -> Self {
        ApproxSection {
            sigmas: vec![0.2, 0.1, 0.05, 0.025],
            correction: Correction::Moment,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmallBallSection {
    pub m: usize,
    pub sigma: f64,
    pub eps: Vec<f64>,
    pub draws: usize,
}

impl Default for SmallBallSection {
    fn default() -> Self {
        SmallBallSection {
            m: 6,
            sigma: 0.5,
            eps: (0..9).map(|i| 0.2 + 0.1 * i as f64).collect(),
            draws: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConcentrationSection {
    pub m: usize,
    pub sigma: f64,
    pub eps: Vec<f64>,
    pub draws: usize,
}

impl Default for ConcentrationSection {
    fn default() -> Self {
        ConcentrationSection {
            m: 10,
            sigma: 0.2,
            eps: vec![0.1, 0.25, 0.5, 1.0, 2.0],
            draws: 20_000,
        }
    }
}

/// Parameter grid of the `rates` table. `inf` in `gammas` selects the
/// analytic branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RatesSection {
    pub alphas: Vec<f64>,
    pub dims: Vec<usize>,
    pub gammas: Vec<f64>,
    pub r: Vec<f64>,
}

impl Default for RatesSection {
    fn default() -> Self {
        RatesSection {
            alphas: vec![0.5, 1.0, 2.0, 3.0],
            dims: vec![1, 2],
            gammas: vec![2.0, 5.0, f64::INFINITY],
            r: vec![0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub prior: PriorSection,
    pub mcmc: McmcConfig,
    pub data: DataSection,
    pub sample_prior: SamplePriorSection,
    pub approx: ApproxSection,
    pub smallball: SmallBallSection,
    pub concentration: ConcentrationSection,
    pub rates: RatesSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        let bad = |msg: String| Err(Error::Config(msg));
        if e.dim == 0 {
            return bad("experiment.dim must be positive".into());
        }
        if !(e.alpha > 0.0) {
            return bad(format!("experiment.alpha = {} must be positive", e.alpha));
        }
        if !(e.tau0 >= 0.0) {
            return bad(format!("experiment.tau0 = {} must be nonnegative", e.tau0));
        }
        if e.replicates == 0 {
            return bad("experiment.replicates must be at least 1".into());
        }
        if e.sample_sizes.contains(&0) || e.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return bad("experiment.sample_sizes must be positive and strictly increasing".into());
        }
        if !(e.level > 0.0 && e.level < 1.0) {
            return bad(format!("experiment.level = {} must lie in (0, 1)", e.level));
        }
        if e.grid < 2 {
            return bad("experiment.grid must be at least 2".into());
        }
        self.domain()?;
        self.prior().validate(e.dim)?;
        self.mcmc.validate()?;
        Ok(())
    }

    pub fn domain(&self) -> Result<Domain> {
        let e = &self.experiment;
        Domain::new(e.domain_lo, e.domain_hi, e.dim).map_err(|err| Error::Config(err.to_string()))
    }

    pub fn prior(&self) -> PriorConfig {
        self.prior.resolve(self.experiment.dim)
    }

    pub fn kernel(&self) -> Result<Kernel> {
        self.experiment.kernel.build(self.experiment.dim)
    }

    /// SHA-256 of the canonical JSON form, as lowercase hex.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.prior(), PriorConfig::default_for(1));
    }

    #[test]
    fn sections_override_defaults() {
        let c = ExperimentConfig::from_toml(
            r#"
            [experiment]
            scenario = "density"
            dim = 2
            truth = "bimodal"
            sample_sizes = [50, 100]

            [prior]
            m_max = 6

            [mcmc]
            iterations = 100
            burn_in = 50

            [rates]
            gammas = [1.0, inf]
            "#,
        )
        .unwrap();
        assert_eq!(c.experiment.scenario, Scenario::Density);
        assert_eq!(c.prior().m_max, 6);
        assert_eq!(c.prior().ig_rate, 0.1);
        assert_eq!(c.mcmc.thin, 10);
        assert!(c.rates.gammas[1].is_infinite());
    }

    #[test]
    fn unknown_keys_and_bad_values_are_errors() {
        for text in [
            "[experiment]\nsmoothness = 2.0",
            "[prior]\nalpha = 2.0",
            "[nonsense]\nx = 1",
            "[experiment]\nsample_sizes = [200, 100]",
            "[experiment]\nreplicates = 0",
            "[mcmc]\niterations = 10\nburn_in = 20",
            "[experiment]\ndomain_lo = 0.9\ndomain_hi = 0.1",
        ] {
            assert!(
                matches!(ExperimentConfig::from_toml(text), Err(Error::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.experiment.seed = 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
