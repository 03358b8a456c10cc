//! Synthetic data sets and the CSV data format `x1,…,xd[,y]`.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::approximation::SmoothFunction;
use crate::error::{Error, Result};
use crate::inference::{ClassificationData, DensityData, Link, RegressionData};
use crate::quadrature::{Domain, Points, QuadratureRule};

/// Deterministic design of `n` points in `X`: cell midpoints in one
/// dimension, an evenly thinned tensor lattice of midpoints otherwise.
pub fn regression_design(domain: &Domain, n: usize) -> Points {
    let d = domain.dim;
    let width = domain.hi - domain.lo;
    if d == 1 {
        let xs: Vec<f64> = (0..n)
            .map(|i| domain.lo + (i as f64 + 0.5) * width / n as f64)
            .collect();
        return Points::from_scalars(&xs);
    }
    let mut k = (n as f64).powf(1.0 / d as f64).round() as usize;
    while k.pow(d as u32) < n {
        k += 1;
    }
    let total = k.pow(d as u32);
    let mut coords = Vec::with_capacity(n * d);
    for i in 0..n {
        let mut flat = i * total / n;
        let mut cell = vec![0; d];
        for c in cell.iter_mut().rev() {
            *c = flat % k;
            flat /= k;
        }
        coords.extend(cell.iter().map(|&c| domain.lo + (c as f64 + 0.5) * width / k as f64));
    }
    Points::new(d, coords).expect("coordinates match the dimension")
}

/// `y_i = θ0(x_i) + τ0 ε_i` on [`regression_design`].
pub fn generate_regression<R: Rng + ?Sized>(
    theta0: impl Fn(&[f64]) -> f64,
    tau0: f64,
    n: usize,
    domain: &Domain,
    rng: &mut R,
) -> Result<RegressionData> {
    if !(tau0 >= 0.0) {
        return Err(Error::arg(format!("noise level τ0 = {tau0} must be nonnegative")));
    }
    let points = regression_design(domain, n);
    let y = points
        .iter()
        .map(|x| theta0(x) + tau0 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    RegressionData::new(points, y, *domain)
}

fn uniform_point<R: Rng + ?Sized>(domain: &Domain, rng: &mut R) -> Vec<f64> {
    (0..domain.dim)
        .map(|_| domain.lo + (domain.hi - domain.lo) * rng.random::<f64>())
        .collect()
}

/// A rejection sample and the number of proposals it took.
#[derive(Debug, Clone)]
pub struct DensitySample {
    pub data: DensityData,
    pub proposals: usize,
}

/// Rejection sampling from `f0` against the uniform proposal on `X`;
/// `envelope` must bound `f0` on `X`.
pub fn generate_density_sample<R: Rng + ?Sized>(
    f0: impl Fn(&[f64]) -> f64,
    envelope: f64,
    n: usize,
    domain: &Domain,
    rng: &mut R,
) -> Result<DensitySample> {
    if !(envelope > 0.0 && envelope.is_finite()) {
        return Err(Error::arg(format!("envelope {envelope} must be positive and finite")));
    }
    let mut coords = Vec::with_capacity(n * domain.dim);
    let mut accepted = 0;
    let mut proposals = 0;
    while accepted < n {
        let x = uniform_point(domain, rng);
        let f = f0(&x);
        if !(f >= 0.0) || f > envelope {
            return Err(Error::arg(format!(
                "density value {f} at {x:?} is negative or above the envelope {envelope}"
            )));
        }
        proposals += 1;
        if rng.random::<f64>() * envelope < f {
            coords.extend_from_slice(&x);
            accepted += 1;
        }
    }
    let points = Points::new(domain.dim, coords)?;
    Ok(DensitySample {
        data: DensityData::new(points, *domain)?,
        proposals,
    })
}

/// Uniform covariates on `X` with labels `Y ~ Bernoulli(r0(X))`.
pub fn generate_classification<R: Rng + ?Sized>(
    r0: impl Fn(&[f64]) -> f64,
    n: usize,
    domain: &Domain,
    rng: &mut R,
) -> Result<ClassificationData> {
    let mut coords = Vec::with_capacity(n * domain.dim);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x = uniform_point(domain, rng);
        let r = r0(&x);
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::arg(format!("class probability {r} at {x:?} outside [0, 1]")));
        }
        labels.push(rng.random::<f64>() < r);
        coords.extend_from_slice(&x);
    }
    ClassificationData::new(Points::new(domain.dim, coords)?, labels, *domain)
}

/// The density `f0 = e^{w0} / ∫_X e^{w0}` on `X`.
#[derive(Clone)]
pub struct ExpDensity {
    w0: SmoothFunction,
    log_norm: f64,
    log_max: f64,
}

impl ExpDensity {
    pub fn new(w0: SmoothFunction, domain: &Domain) -> Result<Self> {
        if w0.dim() != domain.dim {
            return Err(Error::arg("dimension mismatch"));
        }
        let rule = fine_rule(domain);
        let values: Vec<f64> = rule.nodes.iter().map(|x| w0.eval(x)).collect();
        let log_max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = values
            .iter()
            .zip(&rule.weights)
            .map(|(v, w)| w * (v - log_max).exp())
            .sum();
        Ok(ExpDensity {
            w0,
            log_norm: log_max + sum.ln(),
            log_max,
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.w0.eval(x) - self.log_norm).exp()
    }

    /// A bound on `f0` with a margin over the largest value on the fine grid.
    pub fn envelope(&self) -> f64 {
        1.05 * (self.log_max - self.log_norm).exp()
    }
}

/// Trapezoid rule fine enough for reference integrals on `X`.
pub fn fine_rule(domain: &Domain) -> QuadratureRule {
    let per_axis = match domain.dim {
        1 => 4001,
        2 => 401,
        _ => 41,
    };
    domain.trapezoid(per_axis)
}

/// The classification truth `r0 = Ψ(gain · w0)`.
pub fn class_probability(w0: &SmoothFunction, link: Link, gain: f64) -> impl Fn(&[f64]) -> f64 + '_ {
    move |x| link.forward(gain * w0.eval(x))
}

/// Reads `x1,…,xd[,y]` with a header row; returns the points and the `y`
/// column when present.
pub fn read_data(path: &Path) -> Result<(Points, Option<Vec<f64>>)> {
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let dim = names.iter().take_while(|h| h.starts_with('x')).count();
    let expected: Vec<String> = (1..=dim).map(|j| format!("x{j}")).collect();
    let has_y = names.len() == dim + 1 && names[dim] == "y";
    if dim == 0 || names[..dim] != expected || !(names.len() == dim || has_y) {
        return Err(Error::arg(format!(
            "{}: header must be x1,...,xd optionally followed by y, got {names:?}",
            path.display()
        )));
    }
    let mut coords = Vec::new();
    let mut y = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::arg(format!("{}: row {}: cannot parse {s:?}", path.display(), line + 2)))
        };
        for j in 0..dim {
            coords.push(parse(&record[j])?);
        }
        if has_y {
            y.push(parse(&record[dim])?);
        }
    }
    Ok((Points::new(dim, coords)?, has_y.then_some(y)))
}

pub fn write_data(path: &Path, points: &Points, y: Option<&[f64]>) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header: Vec<String> = (1..=points.dim()).map(|j| format!("x{j}")).collect();
    if y.is_some() {
        header.push("y".into());
    }
    w.write_record(&header).map_err(csv_err)?;
    for (i, x) in points.iter().enumerate() {
        let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        if let Some(y) = y {
            row.push(y[i].to_string());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
