//! Building blocks of the Markov chains: Metropolis acceptance, the proposals
//! for `m`, `σ` and `τ`, step-size adaptation and elliptical slice sampling.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

/// Metropolis–Hastings test; a `NaN` ratio rejects.
pub fn metropolis_accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio >= 0.0 {
        return true;
    }
    if log_ratio.is_nan() {
        return false;
    }
    rng.random::<f64>().ln() < log_ratio
}

/// `m ± 1` with equal probability. A step past `1` or `m_max` stays at `m`,
/// which keeps the proposal symmetric.
pub fn propose_m<R: Rng + ?Sized>(m: usize, m_max: usize, rng: &mut R) -> usize {
    if rng.random::<bool>() {
        if m < m_max {
            m + 1
        } else {
            m
        }
    } else if m > 1 {
        m - 1
    } else {
        m
    }
}

/// `x' = x e^{s ξ}`; returns `x'` and the log proposal ratio `log(x'/x)`.
pub fn propose_log_walk<R: Rng + ?Sized>(x: f64, step: f64, rng: &mut R) -> (f64, f64) {
    let xi: f64 = rng.sample(StandardNormal);
    let lx = step * xi;
    (x * lx.exp(), lx)
}

/// Folds `x` back into `[lo, hi]` by repeated reflection at the ends.
pub fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    let period = 2.0 * width;
    let mut r = (x - lo).rem_euclid(period);
    if r > width {
        r = period - r;
    }
    lo + r
}

/// Gaussian random walk reflected into `[lo, hi]`; symmetric.
pub fn propose_reflected<R: Rng + ?Sized>(x: f64, step: f64, lo: f64, hi: f64, rng: &mut R) -> f64 {
    let xi: f64 = rng.sample(StandardNormal);
    reflect(x + step * xi, lo, hi)
}

/// Acceptance bookkeeping with step adaptation during burn-in:
/// after each window the step is multiplied by `exp(rate - target)`.
#[derive(Debug, Clone)]
pub struct Adapter {
    pub step: f64,
    target: f64,
    window: usize,
    window_proposed: usize,
    window_accepted: usize,
    pub proposed: usize,
    pub accepted: usize,
    pub burn_in_accepted: usize,
}

impl Adapter {
    pub fn new(step: f64, target: f64, window: usize) -> Self {
        Adapter {
            step,
            target,
            window: window.max(1),
            window_proposed: 0,
            window_accepted: 0,
            proposed: 0,
            accepted: 0,
            burn_in_accepted: 0,
        }
    }

    pub fn record(&mut self, accepted: bool, burning_in: bool) {
        self.proposed += 1;
        self.accepted += accepted as usize;
        if burning_in {
            self.burn_in_accepted += accepted as usize;
            self.window_proposed += 1;
            self.window_accepted += accepted as usize;
            if self.window_proposed == self.window {
                let rate = self.window_accepted as f64 / self.window as f64;
                self.step *= (rate - self.target).exp();
                self.window_proposed = 0;
                self.window_accepted = 0;
            }
        }
    }

    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// One elliptical slice update of a variable with a standard normal prior.
///
/// `log_lik(c, s)` must return the log likelihood at `z cos θ + ν sin θ`
/// given `(c, s) = (cos θ, sin θ)`, where `ν` is a fresh prior draw chosen by
/// the caller. Returns the accepted `(cos θ, sin θ)` and its log likelihood.
pub fn elliptical_slice<R: Rng + ?Sized>(
    current_ll: f64,
    mut log_lik: impl FnMut(f64, f64) -> f64,
    rng: &mut R,
) -> (f64, f64, f64) {
    let threshold = current_ll + rng.random::<f64>().ln();
    let mut theta = rng.random::<f64>() * 2.0 * PI;
    let (mut lo, mut hi) = (theta - 2.0 * PI, theta);
    loop {
        let (s, c) = theta.sin_cos();
        let ll = log_lik(c, s);
        if ll > threshold {
            return (c, s, ll);
        }
        if theta < 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        // the bracket shrinks towards θ = 0, the current state, which always qualifies
        if hi - lo < 1e-12 {
            return (1.0, 0.0, current_ll);
        }
        theta = lo + rng.random::<f64>() * (hi - lo);
    }
}
