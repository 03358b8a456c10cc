//! Link functions `Ψ: R → (0, 1)` for classification.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    #[default]
    Logistic,
    Probit,
}

impl Link {
    pub fn name(self) -> &'static str {
        match self {
            Link::Logistic => "logistic",
            Link::Probit => "probit",
        }
    }

    /// `Ψ(t)`.
    pub fn forward(self, t: f64) -> f64 {
        match self {
            Link::Logistic => {
                if t >= 0.0 {
                    1.0 / (1.0 + (-t).exp())
                } else {
                    let e = t.exp();
                    e / (1.0 + e)
                }
            }
            Link::Probit => 0.5 * libm::erfc(-t * FRAC_1_SQRT_2),
        }
    }

    /// `Ψ^{-1}(u)` for `u ∈ (0, 1)`.
    pub fn inverse(self, u: f64) -> f64 {
        match self {
            Link::Logistic => (u / (1.0 - u)).ln(),
            Link::Probit => {
                let normal = Normal::standard();
                let mut t = normal.inverse_cdf(u);
                for _ in 0..2 {
                    if !t.is_finite() {
                        break;
                    }
                    let density = (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
                    if density == 0.0 {
                        break;
                    }
                    t -= (self.forward(t) - u) / density;
                }
                t
            }
        }
    }

    /// `log Ψ(t)`, accurate in both tails.
    pub fn log_forward(self, t: f64) -> f64 {
        match self {
            Link::Logistic => -softplus(-t),
            Link::Probit => log_normal_cdf(t),
        }
    }

    /// `log(1 - Ψ(t)) = log Ψ(-t)` for both (symmetric) links.
    pub fn log_complement(self, t: f64) -> f64 {
        self.log_forward(-t)
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Link {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(Link::Logistic),
            "probit" => Ok(Link::Probit),
            _ => Err(Error::arg(format!("unknown link {s:?}; expected logistic or probit"))),
        }
    }
}

/// `log(1 + e^x)`.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn log_normal_cdf(t: f64) -> f64 {
    if t > -30.0 {
        (0.5 * libm::erfc(-t * FRAC_1_SQRT_2)).ln()
    } else {
        // asymptotic expansion of the Mills ratio
        let t2 = t * t;
        let series = 1.0 - 1.0 / t2 + 3.0 / (t2 * t2) - 15.0 / (t2 * t2 * t2);
        -0.5 * t2 - (-t).ln() - 0.5 * (2.0 * PI).ln() + series.ln()
    }
}
