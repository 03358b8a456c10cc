//! The subcommands of the `mixprior` binary, as library functions that write
//! their outputs into a directory and return the written paths.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::config::{ExperimentConfig, Scenario};
use super::data::{
    class_probability, generate_classification, generate_density_sample, generate_regression, read_data, write_data,
    ExpDensity,
};
use super::output::{emit_results, ensure_dir, fmt_opt, manifest, write_csv, write_json};
use super::study::run_rate_study;
use crate::approximation::approximation_slope;
use crate::error::{Error, Result};
use crate::inference::{
    fit_classification, fit_density, fit_regression, predict, ClassificationData, DensityData, PosteriorChain,
    RegressionData,
};
use crate::mixture::sample_prior;
use crate::quadrature::Domain;
use crate::verification::{
    concentration_upper, rate_exponents, small_ball_from_sups, small_ball_shape_check, sup_norm_draws, RateParameters,
};

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    SamplePrior,
    FitReg,
    FitDensity,
    FitClass,
    RateStudy,
    /// Command-line values override the configuration.
    VerifyApprox {
        alpha: Option<f64>,
        sigmas: Option<Vec<f64>>,
        dimension: Option<usize>,
    },
    VerifySmallBall,
    VerifyConcentration,
    Rates,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::SamplePrior => "sample-prior",
            Command::FitReg => "fit-reg",
            Command::FitDensity => "fit-density",
            Command::FitClass => "fit-class",
            Command::RateStudy => "rate-study",
            Command::VerifyApprox { .. } => "verify-approx",
            Command::VerifySmallBall => "verify-smallball",
            Command::VerifyConcentration => "verify-concentration",
            Command::Rates => "rates",
        }
    }
}

/// Runs `command`, writing into `out`. Lines meant for the terminal are
/// returned alongside the written paths.
pub fn run(command: &Command, config: &ExperimentConfig, out: &Path) -> Result<(Vec<PathBuf>, Vec<String>)> {
    let mut config = config.clone();
    if let Command::VerifyApprox {
        alpha,
        sigmas,
        dimension,
    } = command
    {
        if let Some(a) = alpha {
            config.experiment.alpha = *a;
        }
        if let Some(s) = sigmas {
            config.approx.sigmas = s.clone();
        }
        if let Some(d) = dimension {
            config.experiment.dim = *d;
        }
    }
    config.validate()?;
    ensure_dir(out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.experiment.seed);
    match command {
        Command::SamplePrior => sample_prior_cmd(&config, out, &mut rng),
        Command::FitReg | Command::FitDensity | Command::FitClass => fit_cmd(command, &config, out, &mut rng),
        Command::RateStudy => {
            let result = run_rate_study(&config)?;
            let files = emit_results(&result, &config, out)?;
            let mut lines = vec![format!(
                "{} of {} replicates failed",
                result.failures,
                result.records.len()
            )];
            if let Some(f) = result.fit {
                lines.push(format!(
                    "slope {:.4} ± {:.4} (theory {:.4})",
                    f.slope, f.slope_se, result.theoretical_slope
                ));
            }
            result.check()?;
            Ok((files, lines))
        }
        Command::VerifyApprox { .. } => verify_approx_cmd(&config, out),
        Command::VerifySmallBall => verify_smallball_cmd(&config, out, &mut rng),
        Command::VerifyConcentration => verify_concentration_cmd(&config, out, &mut rng),
        Command::Rates => rates_cmd(&config, out),
    }
}

fn coord_header(dim: usize) -> Vec<String> {
    (1..=dim).map(|j| format!("x{j}")).collect()
}

fn sample_prior_cmd(
    config: &ExperimentConfig,
    out: &Path,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<PathBuf>, Vec<String>)> {
    let e = &config.experiment;
    let kernel = config.kernel()?;
    let prior = config.prior();
    let grid = Domain::unit(e.dim).grid(e.grid);
    let mut params = Vec::new();
    let mut values = Vec::new();
    for draw in 0..config.sample_prior.draws {
        let w = sample_prior(&prior, &kernel, rng)?;
        params.push(vec![draw.to_string(), w.m().to_string(), w.sigma().to_string()]);
        for x in grid.iter() {
            let mut row = vec![draw.to_string()];
            row.extend(x.iter().map(|v| v.to_string()));
            row.push(w.eval(&kernel, x).to_string());
            values.push(row);
        }
    }
    let p_path = out.join("prior_parameters.csv");
    write_csv(&p_path, &["draw", "m", "sigma"], &params)?;
    let v_path = out.join("prior_draws.csv");
    let mut header = vec!["draw".to_string()];
    header.extend(coord_header(e.dim));
    header.push("w".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&v_path, &header, &values)?;
    let m_path = out.join("manifest.json");
    write_json(
        &m_path,
        &manifest("sample-prior", config, json!({ "draws": config.sample_prior.draws })),
    )?;
    Ok((
        vec![p_path, v_path, m_path],
        vec![format!(
            "{} prior draws on {} grid points",
            config.sample_prior.draws,
            grid.len()
        )],
    ))
}

enum Fitted {
    Regression(RegressionData),
    Density(DensityData),
    Classification(ClassificationData),
}

fn load_or_generate(
    scenario: Scenario,
    config: &ExperimentConfig,
    domain: &Domain,
    rng: &mut ChaCha8Rng,
) -> Result<Fitted> {
    let e = &config.experiment;
    if let Some(path) = &config.data.path {
        let (points, y) = read_data(path)?;
        if points.dim() != e.dim {
            return Err(Error::arg(format!(
                "{}: data has dimension {} but the configuration says {}",
                path.display(),
                points.dim(),
                e.dim
            )));
        }
        let need_y = || Error::arg(format!("{}: a y column is required", path.display()));
        return Ok(match scenario {
            Scenario::Regression => Fitted::Regression(RegressionData::new(points, y.ok_or_else(need_y)?, *domain)?),
            Scenario::Density => Fitted::Density(DensityData::new(points, *domain)?),
            Scenario::Classification => Fitted::Classification(ClassificationData::from_numeric(
                points,
                &y.ok_or_else(need_y)?,
                *domain,
            )?),
        });
    }
    let w0 = e.truth.build(e.dim, e.alpha)?;
    let n = config.data.n;
    Ok(match scenario {
        Scenario::Regression => Fitted::Regression(generate_regression(|x| w0.eval(x), e.tau0, n, domain, rng)?),
        Scenario::Density => {
            let f0 = ExpDensity::new(w0, domain)?;
            Fitted::Density(generate_density_sample(|x| f0.eval(x), f0.envelope(), n, domain, rng)?.data)
        }
        Scenario::Classification => {
            let r0 = class_probability(&w0, e.link, e.gain);
            Fitted::Classification(generate_classification(r0, n, domain, rng)?)
        }
    })
}

fn fit_cmd(
    command: &Command,
    config: &ExperimentConfig,
    out: &Path,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<PathBuf>, Vec<String>)> {
    let e = &config.experiment;
    let scenario = match command {
        Command::FitReg => Scenario::Regression,
        Command::FitDensity => Scenario::Density,
        _ => Scenario::Classification,
    };
    let domain = config.domain()?;
    let kernel = config.kernel()?;
    let prior = config.prior();
    let data = load_or_generate(scenario, config, &domain, rng)?;
    let mut files = Vec::new();
    if config.data.path.is_none() {
        let path = out.join("data.csv");
        match &data {
            Fitted::Regression(d) => write_data(&path, d.points(), Some(d.y()))?,
            Fitted::Density(d) => write_data(&path, d.points(), None)?,
            Fitted::Classification(d) => {
                let y: Vec<f64> = d.labels().iter().map(|&l| l as u8 as f64).collect();
                write_data(&path, d.points(), Some(&y))?
            }
        }
        files.push(path);
    }
    let (chain, n, training_accuracy): (PosteriorChain, usize, Option<f64>) = match &data {
        Fitted::Regression(d) => (fit_regression(d, &prior, &kernel, &config.mcmc, rng)?, d.n(), None),
        Fitted::Density(d) => (fit_density(d, &prior, &kernel, &config.mcmc, rng)?, d.n(), None),
        Fitted::Classification(d) => {
            let chain = fit_classification(d, e.link, &prior, &kernel, &config.mcmc, rng)?;
            let p = predict(&chain, d.points(), e.level)?;
            let correct = p.mean.iter().zip(d.labels()).filter(|(p, &l)| (**p > 0.5) == l).count();
            (chain, d.n(), Some(correct as f64 / d.n().max(1) as f64))
        }
    };
    let chain = chain.with_seed(e.seed);

    let chain_path = out.join("chain.csv");
    let rows: Vec<Vec<String>> = chain
        .states
        .iter()
        .enumerate()
        .map(|(i, s)| {
            vec![
                s.iteration.to_string(),
                ((i >= chain.burn_in_index) as u8).to_string(),
                s.m.to_string(),
                s.sigma.to_string(),
                fmt_opt(s.tau),
            ]
        })
        .collect();
    write_csv(&chain_path, &["iteration", "kept", "m", "sigma", "tau"], &rows)?;
    files.push(chain_path);

    let grid = domain.grid(e.grid);
    let summary = predict(&chain, &grid, e.level)?;
    let pred_path = out.join("predictive.csv");
    let mut header = coord_header(e.dim);
    header.extend(["mean", "lower", "upper"].map(String::from));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = grid
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            row.extend([summary.mean[i], summary.lower[i], summary.upper[i]].map(|v| v.to_string()));
            row
        })
        .collect();
    write_csv(&pred_path, &header, &rows)?;
    files.push(pred_path);

    let mut lines = vec![format!(
        "{} fit on n = {n}: {} kept states, σ acceptance {:.3}, m acceptance {:.3}",
        chain.model.tag(),
        chain.kept().len(),
        chain.acceptance.sigma,
        chain.acceptance.m
    )];
    let integral = if scenario == Scenario::Density {
        let rule = domain.trapezoid(domain.default_resolution());
        let p = predict(&chain, &rule.nodes, e.level)?;
        let total: f64 = p.mean.iter().zip(&rule.weights).map(|(v, w)| v * w).sum();
        lines.push(format!("predictive density integrates to {total:.8}"));
        Some(total)
    } else {
        None
    };
    if let Some(acc) = training_accuracy {
        lines.push(format!("training accuracy {acc:.4}"));
    }
    let m_path = out.join("manifest.json");
    write_json(
        &m_path,
        &manifest(
            command.name(),
            config,
            json!({
                "model": chain.model,
                "n": n,
                "kept_states": chain.kept().len(),
                "acceptance": chain.acceptance,
                "quantity": summary.quantity,
                "level": summary.level,
                "density_integral": integral,
                "training_accuracy": training_accuracy,
            }),
        ),
    )?;
    files.push(m_path);
    Ok((files, lines))
}

fn verify_approx_cmd(config: &ExperimentConfig, out: &Path) -> Result<(Vec<PathBuf>, Vec<String>)> {
    let e = &config.experiment;
    if config.approx.sigmas.len() < 2 || config.approx.sigmas.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Config("approx.sigmas needs at least two positive values".into()));
    }
    let kernel = config.kernel()?;
    let w0 = e.truth.build(e.dim, e.alpha)?;
    let probe = config.domain()?.probe_grid();
    let study = approximation_slope(&w0, &kernel, &config.approx.sigmas, &probe, config.approx.correction)?;
    let csv_path = out.join("approx.csv");
    let rows: Vec<Vec<String>> = study
        .sigmas
        .iter()
        .zip(&study.errors)
        .map(|(s, err)| vec![s.to_string(), err.to_string()])
        .collect();
    write_csv(&csv_path, &["sigma", "error"], &rows)?;
    let m_path = out.join("manifest.json");
    write_json(
        &m_path,
        &manifest(
            "verify-approx",
            config,
            json!({
                "slope": study.fit.slope,
                "slope_se": study.fit.slope_se,
                "intercept": study.fit.intercept,
                "alpha": e.alpha,
            }),
        ),
    )?;
    Ok((
        vec![csv_path, m_path],
        vec![format!(
            "slope {:.4} ± {:.4} (alpha {})",
            study.fit.slope, study.fit.slope_se, e.alpha
        )],
    ))
}

fn verify_smallball_cmd(
    config: &ExperimentConfig,
    out: &Path,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<PathBuf>, Vec<String>)> {
    let sb = &config.smallball;
    let e = &config.experiment;
    let kernel = config.kernel()?;
    let unit = Domain::unit(e.dim);
    let res = unit.default_resolution();
    let coarse = unit.grid(res);
    let fine = unit.grid(2 * res - 1);
    // the same key gives the same weight draws on both grids
    let mut twin = rng.clone();
    let sups = sup_norm_draws(sb.m, sb.sigma, &kernel, sb.draws, &coarse, rng)?;
    let fine_sups = sup_norm_draws(sb.m, sb.sigma, &kernel, sb.draws, &fine, &mut twin)?;
    let est = small_ball_from_sups(&sups, &sb.eps)?;
    let fine_est = small_ball_from_sups(&fine_sups, &sb.eps)?;
    let rows: Vec<Vec<String>> = est
        .iter()
        .zip(&fine_est)
        .map(|(a, b)| {
            vec![
                a.eps.to_string(),
                a.draws.to_string(),
                a.successes.to_string(),
                a.probability.to_string(),
                a.neg_log.to_string(),
                a.neg_log_lower.to_string(),
                a.neg_log_upper.to_string(),
                (a.zero_successes as u8).to_string(),
                b.probability.to_string(),
            ]
        })
        .collect();
    let csv_path = out.join("smallball.csv");
    write_csv(
        &csv_path,
        &[
            "eps",
            "draws",
            "successes",
            "probability",
            "neg_log",
            "neg_log_lower",
            "neg_log_upper",
            "zero_successes",
            "probability_refined_grid",
        ],
        &rows,
    )?;
    let gamma = kernel.regularity().gamma();
    let shape = if gamma.is_finite() {
        small_ball_shape_check(&est, gamma, e.dim).ok()
    } else {
        None
    };
    let mut lines = Vec::new();
    match &shape {
        Some(s) => lines.push(format!(
            "affine bound in eps^-{:.3}: {}",
            s.power,
            if s.passed { "holds" } else { "violated" }
        )),
        None => lines.push("no shape check (analytic kernel or too few successes)".into()),
    }
    let m_path = out.join("manifest.json");
    write_json(
        &m_path,
        &manifest("verify-smallball", config, json!({ "shape": shape })),
    )?;
    Ok((vec![csv_path, m_path], lines))
}

fn verify_concentration_cmd(
    config: &ExperimentConfig,
    out: &Path,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<PathBuf>, Vec<String>)> {
    let c = &config.concentration;
    let e = &config.experiment;
    let kernel = config.kernel()?;
    let domain = config.domain()?;
    let w0 = e.truth.build(e.dim, e.alpha)?;
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for &eps in &c.eps {
        // each radius gets the same draws
        let mut r = rng.clone();
        match concentration_upper(&w0, &kernel, c.m, c.sigma, eps, &domain, c.draws, &mut r) {
            Ok(b) => {
                rows.push(vec![
                    eps.to_string(),
                    b.approximation_error.to_string(),
                    b.rkhs_term.to_string(),
                    b.small_ball.neg_log.to_string(),
                    (b.small_ball.zero_successes as u8).to_string(),
                    b.total.to_string(),
                    "ok".into(),
                ]);
                lines.push(format!("eps {eps}: bound {:.4}", b.total));
            }
            Err(Error::Precondition(msg)) => {
                let mut row = vec![eps.to_string()];
                row.extend(std::iter::repeat_n(String::new(), 5));
                row.push("precondition".into());
                rows.push(row);
                lines.push(format!("eps {eps}: {msg}"));
            }
            Err(other) => return Err(other),
        }
    }
    let csv_path = out.join("concentration.csv");
    write_csv(
        &csv_path,
        &[
            "eps",
            "approximation_error",
            "rkhs_term",
            "small_ball",
            "zero_successes",
            "total",
            "status",
        ],
        &rows,
    )?;
    let m_path = out.join("manifest.json");
    write_json(&m_path, &manifest("verify-concentration", config, json!({})))?;
    Ok((vec![csv_path, m_path], lines))
}

fn rates_cmd(config: &ExperimentConfig, out: &Path) -> Result<(Vec<PathBuf>, Vec<String>)> {
    let r = &config.rates;
    let mut rows = Vec::new();
    let mut lines = vec![format!(
        "{:>6} {:>3} {:>8} {:>5} {:>10} {:>10} {:>10} {:>10} {}",
        "alpha", "d", "gamma", "r", "eps", "eps_log", "eps_bar", "bar_log", "flag"
    )];
    for &alpha in &r.alphas {
        for &d in &r.dims {
            for &gamma in &r.gammas {
                for &rr in &r.r {
                    let g = gamma.is_finite().then_some(gamma);
                    let res = RateParameters::new(alpha, d, g, rr).and_then(|p| rate_exponents(&p));
                    let mut row = vec![alpha.to_string(), d.to_string(), gamma.to_string(), rr.to_string()];
                    match res {
                        Ok(x) => {
                            row.extend([
                                serde_json::to_value(x.branch)
                                    .expect("branch")
                                    .as_str()
                                    .unwrap_or("")
                                    .to_string(),
                                x.eps_exponent.to_string(),
                                x.eps_log_power.to_string(),
                                x.eps_bar_exponent.to_string(),
                                x.eps_bar_log_power.to_string(),
                                (x.flagged as u8).to_string(),
                                "ok".into(),
                            ]);
                            lines.push(format!(
                                "{alpha:>6} {d:>3} {gamma:>8} {rr:>5} {:>10.5} {:>10.5} {:>10.5} {:>10.5} {}",
                                x.eps_exponent,
                                x.eps_log_power,
                                x.eps_bar_exponent,
                                x.eps_bar_log_power,
                                if x.flagged { "flagged" } else { "" }
                            ));
                        }
                        Err(_) => {
                            row.extend(["", "", "", "", "", "", "invalid"].map(String::from));
                        }
                    }
                    rows.push(row);
                }
            }
        }
    }
    let csv_path = out.join("rates.csv");
    write_csv(
        &csv_path,
        &[
            "alpha",
            "d",
            "gamma",
            "r",
            "branch",
            "eps_exponent",
            "eps_log_power",
            "eps_bar_exponent",
            "eps_bar_log_power",
            "flagged",
            "status",
        ],
        &rows,
    )?;
    let m_path = out.join("manifest.json");
    write_json(&m_path, &manifest("rates", config, json!({})))?;
    Ok((vec![csv_path, m_path], lines))
}
