//! Posterior predictive summaries over the recorded states of a chain.

use serde::Serialize;

use super::latent::log_normalizer;
use super::{Model, PosteriorChain};
use crate::error::{Error, Result};
use crate::mixture::basis_matrix;
use crate::quadrature::Points;
use crate::stats::quantile_sorted;

/// Pointwise posterior mean and equal-tailed credible band of `θ = W`
/// (regression), of the normalized density (density) or of `Ψ(W)`
/// (classification).
#[derive(Debug, Clone, Serialize)]
pub struct PredictiveSummary {
    pub quantity: &'static str,
    pub level: f64,
    #[serde(skip)]
    pub points: Points,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Values of the predicted quantity at `points`, one vector per kept state.
pub fn state_values(chain: &PosteriorChain, points: &Points) -> Result<Vec<Vec<f64>>> {
    let kept = chain.kept();
    if kept.is_empty() {
        return Err(Error::arg("chain has no states after burn-in"));
    }
    if points.dim() != chain.dim {
        return Err(Error::arg("prediction points do not match the chain dimension"));
    }
    let rule = match &chain.model {
        Model::Density { domain, per_axis } => Some(domain.trapezoid(*per_axis)),
        _ => None,
    };
    kept.iter()
        .map(|s| {
            let z = nalgebra::DVector::from_column_slice(&s.z);
            let w = basis_matrix(s.m, s.sigma, &chain.kernel, points)?.matrix * &z;
            Ok(match &chain.model {
                Model::Regression => w.as_slice().to_vec(),
                Model::Density { .. } => {
                    let rule = rule.as_ref().expect("density rule");
                    let grid = basis_matrix(s.m, s.sigma, &chain.kernel, &rule.nodes)?.matrix * &z;
                    let log_z = log_normalizer(grid.as_slice(), rule);
                    w.iter().map(|v| (v - log_z).exp()).collect()
                }
                Model::Classification { link } => w.iter().map(|&v| link.forward(v)).collect(),
            })
        })
        .collect()
}

/// Posterior mean and `level` credible band at `points`.
///
/// The band is the pair of empirical `(1 ∓ level)/2` quantiles, widened where
/// necessary so that it contains the mean.
pub fn predict(chain: &PosteriorChain, points: &Points, level: f64) -> Result<PredictiveSummary> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::arg(format!("credible level {level} must lie in (0, 1)")));
    }
    let values = state_values(chain, points)?;
    let k = values.len();
    let mut mean = Vec::with_capacity(points.len());
    let mut lower = Vec::with_capacity(points.len());
    let mut upper = Vec::with_capacity(points.len());
    let mut column = vec![0.0; k];
    for i in 0..points.len() {
        for (c, v) in column.iter_mut().zip(&values) {
            *c = v[i];
        }
        let mu = column.iter().sum::<f64>() / k as f64;
        column.sort_by(f64::total_cmp);
        mean.push(mu);
        lower.push(quantile_sorted(&column, (1.0 - level) / 2.0).min(mu));
        upper.push(quantile_sorted(&column, (1.0 + level) / 2.0).max(mu));
    }
    Ok(PredictiveSummary {
        quantity: match chain.model {
            Model::Regression => "theta",
            Model::Density { .. } => "density",
            Model::Classification { .. } => "probability",
        },
        level,
        points: points.clone(),
        mean,
        lower,
        upper,
    })
}
