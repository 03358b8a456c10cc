//! Density estimation and classification, where `z` is sampled explicitly.
//!
//! Each iteration performs an elliptical slice update of `z`, a log-scale
//! random walk on `σ` with `z` held fixed, and a move `m → m ± 1` that draws a
//! fresh `z' ~ N(0, I)`. Since the proposal density of `z'` is its prior
//! density, the acceptance ratio of the `m` move reduces to the likelihood ratio
//! times the prior ratio of `m`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::link::Link;
use super::samplers::{elliptical_slice, metropolis_accept, propose_log_walk, propose_m, Adapter};
use super::{AcceptanceRates, ChainState, ClassificationData, DensityData, Init, McmcConfig, Model, PosteriorChain};
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::mixture::{basis_matrix, PriorConfig};
use crate::quadrature::{Points, QuadratureRule};

/// `log ∫ e^W` from values of `W` at the nodes of `rule`, in log-sum-exp form.
pub fn log_normalizer(values: &[f64], rule: &QuadratureRule) -> f64 {
    let terms: Vec<f64> = values
        .iter()
        .zip(&rule.weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(v, w)| v + w.ln())
        .collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

enum Likelihood<'a> {
    Density { n: usize, rule: QuadratureRule },
    Classification { labels: &'a [bool], link: Link },
}

impl Likelihood<'_> {
    fn grid(&self) -> Option<&Points> {
        match self {
            Likelihood::Density { rule, .. } => Some(&rule.nodes),
            Likelihood::Classification { .. } => None,
        }
    }

    fn eval(&self, w_data: &[f64], w_grid: &[f64]) -> f64 {
        match self {
            Likelihood::Density { n, rule } => {
                if *n == 0 {
                    return 0.0;
                }
                w_data.iter().sum::<f64>() - *n as f64 * log_normalizer(w_grid, rule)
            }
            Likelihood::Classification { labels, link } => w_data
                .iter()
                .zip(labels.iter())
                .map(|(&w, &y)| if y { link.log_forward(w) } else { link.log_complement(w) })
                .sum(),
        }
    }
}

struct Bases {
    data: DMatrix<f64>,
    grid: DMatrix<f64>,
}

impl Bases {
    fn new(m: usize, sigma: f64, kernel: &Kernel, data: &Points, grid: Option<&Points>) -> Result<Self> {
        let data = basis_matrix(m, sigma, kernel, data)?.matrix;
        let grid = match grid {
            Some(g) => basis_matrix(m, sigma, kernel, g)?.matrix,
            None => DMatrix::zeros(0, data.ncols()),
        };
        Ok(Bases { data, grid })
    }
}

struct Current {
    m: usize,
    sigma: f64,
    z: DVector<f64>,
    bases: Bases,
    w_data: DVector<f64>,
    w_grid: DVector<f64>,
    ll: f64,
}

impl Current {
    fn new(m: usize, sigma: f64, z: DVector<f64>, bases: Bases, lik: &Likelihood<'_>) -> Self {
        let w_data = &bases.data * &z;
        let w_grid = &bases.grid * &z;
        let ll = lik.eval(w_data.as_slice(), w_grid.as_slice());
        Current {
            m,
            sigma,
            z,
            bases,
            w_data,
            w_grid,
            ll,
        }
    }
}

fn standard_normal_vector<R: Rng + ?Sized>(len: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn run<R: Rng + ?Sized>(
    model: Model,
    points: &Points,
    lik: Likelihood<'_>,
    prior: &PriorConfig,
    kernel: &Kernel,
    mcmc: &McmcConfig,
    rng: &mut R,
) -> Result<PosteriorChain> {
    let dim = kernel.dim();
    if points.dim() != dim {
        return Err(Error::arg("data and kernel dimensions differ"));
    }
    prior.validate(dim)?;
    mcmc.validate()?;
    let grid = lik.grid();

    let (m0, sigma0) = match mcmc.init {
        Init::Scan => {
            let m = prior.m_max.div_ceil(3);
            (m, (1.0 / m as f64).clamp(prior.sigma_lo, prior.sigma_hi))
        }
        Init::Prior => {
            let m = prior.sample_m(rng);
            let s = prior.sample_sigma_unclipped(dim, rng);
            (m, s.clamp(prior.sigma_lo, prior.sigma_hi))
        }
    };
    let bases = Bases::new(m0, sigma0, kernel, points, grid)?;
    let z0 = match mcmc.init {
        Init::Scan => DVector::zeros(bases.data.ncols()),
        Init::Prior => standard_normal_vector(bases.data.ncols(), rng),
    };
    let mut cur = Current::new(m0, sigma0, z0, bases, &lik);

    let mut ad_sigma = Adapter::new(mcmc.sigma_step, mcmc.target_acceptance, mcmc.adapt_window);
    let (mut m_proposed, mut m_accepted) = (0usize, 0usize);
    let mut ess_calls = 0usize;
    let mut states = Vec::with_capacity(mcmc.iterations / mcmc.thin);
    let mut burn_in_index = 0;
    let mut trial_data = DVector::zeros(0);
    let mut trial_grid = DVector::zeros(0);

    for it in 0..mcmc.iterations {
        let burning = it < mcmc.burn_in;

        // elliptical slice on z
        let nu = standard_normal_vector(cur.z.len(), rng);
        let nu_data = &cur.bases.data * &nu;
        let nu_grid = &cur.bases.grid * &nu;
        let (c, s, ll) = elliptical_slice(
            cur.ll,
            |c, s| {
                ess_calls += 1;
                trial_data = &cur.w_data * c + &nu_data * s;
                trial_grid = &cur.w_grid * c + &nu_grid * s;
                lik.eval(trial_data.as_slice(), trial_grid.as_slice())
            },
            rng,
        );
        cur.z = &cur.z * c + &nu * s;
        cur.w_data = &cur.w_data * c + &nu_data * s;
        cur.w_grid = &cur.w_grid * c + &nu_grid * s;
        cur.ll = ll;

        // bandwidth
        let (sigma, log_q) = propose_log_walk(cur.sigma, ad_sigma.step, rng);
        let mut accepted = false;
        if prior.sigma_in_clip(sigma) {
            let bases = Bases::new(cur.m, sigma, kernel, points, grid)?;
            let prop = Current::new(cur.m, sigma, cur.z.clone(), bases, &lik);
            let ratio = prop.ll - cur.ll + prior.log_sigma_density(sigma, dim)
                - prior.log_sigma_density(cur.sigma, dim)
                + log_q;
            if metropolis_accept(ratio, rng) {
                cur = prop;
                accepted = true;
            }
        }
        ad_sigma.record(accepted, burning);

        // grid size, with a fresh prior draw of the weights
        let m = propose_m(cur.m, prior.m_max, rng);
        if m != cur.m {
            m_proposed += 1;
            let bases = Bases::new(m, cur.sigma, kernel, points, grid)?;
            let z = standard_normal_vector(bases.data.ncols(), rng);
            let prop = Current::new(m, cur.sigma, z, bases, &lik);
            let ratio = prop.ll - cur.ll + prior.log_prior_m(m) - prior.log_prior_m(cur.m);
            if metropolis_accept(ratio, rng) {
                cur = prop;
                m_accepted += 1;
            }
        }

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
                tau: None,
                z: cur.z.as_slice().to_vec(),
            });
        }
    }

    Ok(PosteriorChain {
        model,
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
            tau: None,
            ess_evaluations: Some(ess_calls as f64 / mcmc.iterations as f64),
            final_sigma_step: ad_sigma.step,
            final_tau_step: None,
        },
        seed: None,
    })
}

/// Chain for the density prior `e^W / ∫_X e^W`.
pub fn fit_density<R: Rng + ?Sized>(
    data: &DensityData,
    prior: &PriorConfig,
    kernel: &Kernel,
    mcmc: &McmcConfig,
    rng: &mut R,
) -> Result<PosteriorChain> {
    let domain = *data.domain();
    let per_axis = domain.default_resolution();
    let lik = Likelihood::Density {
        n: data.n(),
        rule: domain.trapezoid(per_axis),
    };
    run(
        Model::Density { domain, per_axis },
        data.points(),
        lik,
        prior,
        kernel,
        mcmc,
        rng,
    )
}

/// Chain for the classification prior `Ψ(W)`.
pub fn fit_classification<R: Rng + ?Sized>(
    data: &ClassificationData,
    link: Link,
    prior: &PriorConfig,
    kernel: &Kernel,
    mcmc: &McmcConfig,
    rng: &mut R,
) -> Result<PosteriorChain> {
    let lik = Likelihood::Classification {
        labels: data.labels(),
        link,
    };
    run(
        Model::Classification { link },
        data.points(),
        lik,
        prior,
        kernel,
        mcmc,
        rng,
    )
}
