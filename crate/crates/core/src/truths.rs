//! Reference functions of known smoothness with analytic derivatives.
//!
//! All functions here are sums of one-dimensional profiles across the axes,
//! `f(x) = Σ_j g(x_j)`, so a mixed partial derivative vanishes and
//! `D^k f = g^{(k_j)}(x_j)` when `k` is concentrated on axis `j`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::approximation::SmoothFunction;
use crate::error::{Error, Result};

/// Envelope width of [`holder_profile`].
pub const HOLDER_ENVELOPE: f64 = 0.5;

/// Number of octaves in [`lacunary`].
pub const LACUNARY_LEVELS: usize = 12;

type Profile = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;

fn additive(dim: usize, alpha: f64, g: Profile) -> Result<SmoothFunction> {
    let gv = g.clone();
    let f = SmoothFunction::new(dim, alpha, move |x| x.iter().map(|&t| gv(0, t)).sum())?;
    Ok(f.with_derivatives(move |k, x| {
        let mut axes = k.iter().enumerate().filter(|(_, &kj)| kj > 0);
        match (axes.next(), axes.next()) {
            (Some((j, &kj)), None) => g(kj, x[j]),
            _ => 0.0,
        }
    }))
}

/// Probabilists' Hermite polynomial `He_n(t)`.
pub fn hermite(n: usize, t: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, t);
    if n == 0 {
        return h0;
    }
    for k in 1..n {
        let h2 = t * h1 - k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

fn is_even_integer(alpha: f64) -> bool {
    alpha.fract() == 0.0 && (alpha as i64) % 2 == 0
}

/// `g(u) = |u|^α e^{-u²/(2w²)}` at `u = x - 1/2`, exactly `α`-Hölder at the
/// centre and smooth elsewhere. For even integer `α` the power is replaced by
/// `sgn(u)|u|^α`, since `|u|^α` would be a polynomial.
pub fn holder_profile(dim: usize, alpha: f64) -> Result<SmoothFunction> {
    let odd = is_even_integer(alpha);
    let w = HOLDER_ENVELOPE;
    let g = move |order: usize, x: f64| -> f64 {
        let u = x - 0.5;
        let s = u.signum();
        let au = u.abs();
        let mut acc = 0.0;
        let mut binom = 1.0;
        for i in 0..=order {
            // i-th derivative of the power part
            let falling: f64 = (0..i).map(|r| alpha - r as f64).product();
            let sign = if (i + odd as usize).is_multiple_of(2) { 1.0 } else { s };
            let power = if au == 0.0 {
                if alpha > i as f64 {
                    0.0
                } else {
                    f64::NAN
                }
            } else {
                falling * sign * au.powf(alpha - i as f64)
            };
            let j = order - i;
            let envelope = (-1.0 / w).powi(j as i32) * hermite(j, u / w) * (-u * u / (2.0 * w * w)).exp();
            acc += binom * power * envelope;
            binom = binom * (order - i) as f64 / (i + 1) as f64;
        }
        acc
    };
    additive(dim, alpha, Arc::new(g))
}

/// `Σ_j sin(2π x_j)`; analytic, declared with smoothness `alpha`.
pub fn sine_bump(dim: usize, alpha: f64) -> SmoothFunction {
    let g = |order: usize, x: f64| (2.0 * PI).powi(order as i32) * (2.0 * PI * x + order as f64 * PI / 2.0).sin();
    additive(dim, alpha, Arc::new(g)).expect("valid arguments")
}

/// Truncated lacunary series `Σ_j Σ_{l<L} 2^{-lα} cos(2^l π x_j)`, with the same
/// roughness `α` at every location down to scale `2^{-L}`.
pub fn lacunary(dim: usize, alpha: f64) -> Result<SmoothFunction> {
    let g = move |order: usize, x: f64| {
        (0..LACUNARY_LEVELS)
            .map(|l| {
                let freq = 2f64.powi(l as i32) * PI;
                2f64.powf(-(l as f64) * alpha) * freq.powi(order as i32) * (freq * x + order as f64 * PI / 2.0).cos()
            })
            .sum()
    };
    additive(dim, alpha, Arc::new(g))
}

/// Centres, width and height of the two bumps of [`bimodal`].
pub const BIMODAL_CENTRES: [f64; 2] = [0.3, 0.7];
pub const BIMODAL_WIDTH: f64 = 0.08;
pub const BIMODAL_HEIGHT: f64 = 2.0;

/// `Σ_j h Σ_c e^{-(x_j - c)²/(2w²)}`; analytic. `e^{f}` is a bimodal density
/// shape in one dimension.
pub fn bimodal(dim: usize, alpha: f64) -> Result<SmoothFunction> {
    let w = BIMODAL_WIDTH;
    let g = move |order: usize, x: f64| {
        BIMODAL_CENTRES
            .iter()
            .map(|c| {
                let u = x - c;
                BIMODAL_HEIGHT * (-1.0 / w).powi(order as i32) * hermite(order, u / w) * (-u * u / (2.0 * w * w)).exp()
            })
            .sum()
    };
    additive(dim, alpha, Arc::new(g))
}

/// Named reference function, selectable from configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truth {
    Holder,
    Sine,
    Lacunary,
    Bimodal,
}

impl Truth {
    pub fn build(self, dim: usize, alpha: f64) -> Result<SmoothFunction> {
        match self {
            Truth::Holder => holder_profile(dim, alpha),
            Truth::Sine => Ok(sine_bump(dim, alpha)),
            Truth::Lacunary => lacunary(dim, alpha),
            Truth::Bimodal => bimodal(dim, alpha),
        }
    }
}

impl std::str::FromStr for Truth {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "holder" => Ok(Truth::Holder),
            "sine" => Ok(Truth::Sine),
            "lacunary" => Ok(Truth::Lacunary),
            "bimodal" => Ok(Truth::Bimodal),
            _ => Err(Error::arg(format!(
                "unknown truth {s:?}; expected holder, sine, lacunary or bimodal"
            ))),
        }
    }
}
