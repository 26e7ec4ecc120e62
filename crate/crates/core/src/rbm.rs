//! Reflected Brownian motion started at zero: the reference model against
//! which the diffusion-scaled queue is compared.
//!
//! The transition law from zero has the classical closed form
//! `P(R(t) <= x) = Phi((x - mu t) / (sigma sqrt(t)))
//!                 - exp(2 mu x / sigma^2) * Phi((-x - mu t) / (sigma sqrt(t)))`,
//! and for negative drift the stationary law is exponential with mean
//! `sigma^2 / (2 |mu|)`.
//!
//! Path simulation applies the reflection map `R(t) = X(t) - min(0, min_{s <= t} X(s))`
//! to a Brownian path sampled on a refinement of the observation grid. The
//! discrete running minimum misses excursion bottoms between grid points,
//! which biases `R` upward by `O(sigma * sqrt(substep))`; the refinement
//! factor controls that bias.

use crate::service_dist::SecondMoment;
use crate::special::normal_cdf;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RbmError {
    #[error("invalid RBM parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),
}

/// Drift and variance of a reflected Brownian motion started at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbmParams {
    pub mu: f64,
    pub sigma2: f64,
}

impl RbmParams {
    /// `sigma2` may be zero (a degenerate, drift-only path); stationary
    /// quantities additionally need `mu < 0` and `sigma2 > 0`.
    pub fn new(mu: f64, sigma2: f64) -> Result<Self, RbmError> {
        if !mu.is_finite() || !sigma2.is_finite() || sigma2 < 0.0 {
            return Err(RbmError::InvalidParameter(format!(
                "need finite mu and nonnegative sigma2, got mu={mu}, sigma2={sigma2}"
            )));
        }
        Ok(RbmParams { mu, sigma2 })
    }

    /// Limit parameters implied by a queue in heavy traffic.
    ///
    /// The rescaled workload behaves like Brownian motion with drift
    /// `-beta` and variance `s2 / m` per unit rescaled time, and the queue
    /// length collapses onto workload divided by the equilibrium residual
    /// mean `s2 / (2m)`. Composing the two gives
    /// `mu = -2 m beta / s2` and `sigma2 = 4 m / s2`, which pins the
    /// stationary mean at `1 / beta` — consistent with the unit-mean
    /// exponential limit of the scaled stationary queue length.
    pub fn from_queue(
        mean_service: f64,
        second_moment: SecondMoment,
        beta: f64,
    ) -> Result<Self, RbmError> {
        let s2 = match second_moment {
            SecondMoment::Finite(v) if v > 0.0 => v,
            SecondMoment::Finite(v) => {
                return Err(RbmError::InvalidParameter(format!(
                    "second moment must be positive, got {v}"
                )))
            }
            SecondMoment::Infinite => {
                return Err(RbmError::UnsupportedRegime(
                    "diffusion parameters need a finite service second moment".to_string(),
                ))
            }
        };
        if !(mean_service > 0.0) || !(beta > 0.0) {
            return Err(RbmError::InvalidParameter(format!(
                "need positive service mean and beta, got m={mean_service}, beta={beta}"
            )));
        }
        Ok(RbmParams {
            mu: -2.0 * mean_service * beta / s2,
            sigma2: 4.0 * mean_service / s2,
        })
    }

    /// Stationary mean `sigma2 / (2 |mu|)`, defined for negative drift.
    pub fn stationary_mean(&self) -> Option<f64> {
        if self.mu < 0.0 && self.sigma2 > 0.0 {
            Some(self.sigma2 / (2.0 * self.mu.abs()))
        } else {
            None
        }
    }

    /// Stationary CDF `1 - exp(2 mu x / sigma2)`, defined for negative
    /// drift.
    pub fn stationary_cdf(&self, x: f64) -> Option<f64> {
        if self.mu < 0.0 && self.sigma2 > 0.0 {
            Some(if x < 0.0 {
                0.0
            } else {
                1.0 - (2.0 * self.mu * x / self.sigma2).exp()
            })
        } else {
            None
        }
    }
}

/// Transition CDF `P(R(t) <= x)` of the RBM started at zero.
pub fn transition_cdf(x: f64, t: f64, p: &RbmParams) -> Result<f64, RbmError> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(RbmError::InvalidParameter(format!(
            "transition time must be positive, got {t}"
        )));
    }
    if p.sigma2 <= 0.0 {
        return Err(RbmError::UnsupportedRegime(
            "transition law needs sigma2 > 0".to_string(),
        ));
    }
    if x < 0.0 {
        return Ok(0.0);
    }
    let sigma_rt = (p.sigma2 * t).sqrt();
    let first = normal_cdf((x - p.mu * t) / sigma_rt);
    let second = (2.0 * p.mu * x / p.sigma2).exp() * normal_cdf((-x - p.mu * t) / sigma_rt);
    Ok((first - second).clamp(0.0, 1.0))
}

/// Simulates one RBM path and records it at the grid times.
///
/// The grid must be strictly increasing with `grid[0] > 0`. Each grid
/// interval (including the one from time zero) is refined into `substeps`
/// Gaussian increments before the reflection map is applied.
pub fn simulate_path<R: Rng + ?Sized>(
    p: &RbmParams,
    grid: &[f64],
    substeps: usize,
    rng: &mut R,
) -> Result<Vec<f64>, RbmError> {
    if grid.is_empty() {
        return Err(RbmError::InvalidParameter(
            "grid must be nonempty".to_string(),
        ));
    }
    if !(grid[0] > 0.0) {
        return Err(RbmError::InvalidParameter(format!(
            "grid must start after time zero, got {}",
            grid[0]
        )));
    }
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(RbmError::InvalidParameter(
                "grid times must be strictly increasing".to_string(),
            ));
        }
    }
    if substeps == 0 {
        return Err(RbmError::InvalidParameter(
            "need at least one substep per grid interval".to_string(),
        ));
    }
    let sigma = p.sigma2.sqrt();
    let mut x = 0.0;
    let mut running_min = 0.0_f64;
    let mut prev_t = 0.0;
    let mut out = Vec::with_capacity(grid.len());
    for &t in grid {
        let h = (t - prev_t) / substeps as f64;
        let drift = p.mu * h;
        let scale = sigma * h.sqrt();
        for _ in 0..substeps {
            let z: f64 = rng.sample(StandardNormal);
            x += drift + scale * z;
            if x < running_min {
                running_min = x;
            }
        }
        out.push(x - running_min.min(0.0));
        prev_t = t;
    }
    Ok(out)
}
