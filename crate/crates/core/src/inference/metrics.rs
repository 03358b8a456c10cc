//! Error measures between estimates and truths.

use crate::error::{Error, Result};
use crate::quadrature::{Points, QuadratureRule};

/// `(1/n) Σ_j (θ(x_j) - θ₀(x_j))²`, the squared empirical `L2` distance.
pub fn empirical_l2_error(
    estimate: impl Fn(&[f64]) -> f64,
    truth: impl Fn(&[f64]) -> f64,
    points: &Points,
) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::arg("empirical L2 error needs at least one point"));
    }
    let sum: f64 = points.iter().map(|x| (estimate(x) - truth(x)).powi(2)).sum();
    Ok(sum / points.len() as f64)
}

/// `sqrt((1/2) ∫ (√f - √g)²)`, in `[0, 1]` for densities.
pub fn hellinger(f: impl Fn(&[f64]) -> f64, g: impl Fn(&[f64]) -> f64, rule: &QuadratureRule) -> Result<f64> {
    let fv: Vec<f64> = rule.nodes.iter().map(f).collect();
    let gv: Vec<f64> = rule.nodes.iter().map(g).collect();
    hellinger_values(&fv, &gv, &rule.weights)
}

/// [`hellinger`] from density values at the nodes of a rule with `weights`.
pub fn hellinger_values(f: &[f64], g: &[f64], weights: &[f64]) -> Result<f64> {
    if f.len() != weights.len() || g.len() != weights.len() {
        return Err(Error::arg("density values and weights differ in length"));
    }
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        let (a, b) = (f[i], g[i]);
        if a < 0.0 || b < 0.0 || a.is_nan() || b.is_nan() {
            return Err(Error::arg(format!("negative or undefined density value at node {i}")));
        }
        acc += w * (a.sqrt() - b.sqrt()).powi(2);
    }
    Ok((0.5 * acc).max(0.0).sqrt())
}
