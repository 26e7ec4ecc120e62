//! Service-time distributions.
//!
//! Every law exposes its exact mean, its exact second moment (or an explicit
//! infinity marker when the tail is too heavy), its tail function, and
//! seeded sampling. The two regularly varying families additionally solve
//! for the heavy-tail time constant `c_r`, defined by `c_r * tail(c_r) = 1/r`.
//!
//! The regularly varying tails come in two flavours: the pure power law
//! `(x / x_min)^(-alpha)` and the same tail multiplied by the slowly varying
//! factor `1 + ln(x / x_min)`. Both are restricted to `alpha > 1` so the
//! mean exists.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ServiceError {
    #[error("invalid service distribution parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),
}

/// Second moment of a service law; infinite-variance tails get an explicit
/// marker rather than an IEEE infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SecondMoment {
    Finite(f64),
    Infinite,
}

impl SecondMoment {
    pub fn is_finite(&self) -> bool {
        matches!(self, SecondMoment::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            SecondMoment::Finite(v) => Some(*v),
            SecondMoment::Infinite => None,
        }
    }
}

/// Solution of `c_r * tail(c_r) = 1/r`.
///
/// `at_boundary` is set when the defining map is already at or below `1/r`
/// at the left end of the support, in which case `c_r = x_min` and the
/// defining equation holds only as an inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrSolution {
    pub c_r: f64,
    pub at_boundary: bool,
}

/// A service-time law.
#[derive(Debug, Clone, PartialEq)]
pub enum ServiceDistribution {
    Exponential { mean: f64 },
    Deterministic { value: f64 },
    HyperExp { probs: Vec<f64>, means: Vec<f64> },
    Erlang { stages: usize, mean: f64 },
    Pareto { alpha: f64, x_min: f64 },
    ParetoLog { alpha: f64, x_min: f64 },
}

use ServiceDistribution::*;

fn positive(name: &str, v: f64) -> Result<(), ServiceError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ServiceError::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl ServiceDistribution {
    pub fn exponential(mean: f64) -> Result<Self, ServiceError> {
        positive("mean", mean)?;
        Ok(Exponential { mean })
    }

    pub fn deterministic(value: f64) -> Result<Self, ServiceError> {
        positive("value", value)?;
        Ok(Deterministic { value })
    }

    /// Mixture of exponentials: branch `j` has probability `probs[j]` and
    /// mean `means[j]`. Probabilities are normalized if their sum is off.
    pub fn hyper_exp(probs: Vec<f64>, means: Vec<f64>) -> Result<Self, ServiceError> {
        if probs.is_empty() || probs.len() != means.len() {
            return Err(ServiceError::InvalidParameter(
                "hyperexponential needs matching, nonempty probs and means".to_string(),
            ));
        }
        for &p in &probs {
            if !p.is_finite() || p < 0.0 {
                return Err(ServiceError::InvalidParameter(format!(
                    "branch probability {p} out of range"
                )));
            }
        }
        for &m in &means {
            positive("branch mean", m)?;
        }
        let sum: f64 = probs.iter().sum();
        if sum <= 0.0 {
            return Err(ServiceError::InvalidParameter(
                "branch probabilities sum to zero".to_string(),
            ));
        }
        let probs = probs.into_iter().map(|p| p / sum).collect();
        Ok(HyperExp { probs, means })
    }

    /// Hyperexponential rescaled so the mixture mean equals `target_mean`.
    pub fn hyper_exp_with_mean(
        probs: Vec<f64>,
        means: Vec<f64>,
        target_mean: f64,
    ) -> Result<Self, ServiceError> {
        positive("target mean", target_mean)?;
        let d = Self::hyper_exp(probs, means)?;
        let scale = target_mean / d.mean();
        match d {
            HyperExp { probs, means } => Ok(HyperExp {
                probs,
                means: means.into_iter().map(|m| m * scale).collect(),
            }),
            _ => unreachable!(),
        }
    }

    /// Sum of `stages` independent exponentials with overall mean `mean`.
    pub fn erlang(stages: usize, mean: f64) -> Result<Self, ServiceError> {
        if stages == 0 {
            return Err(ServiceError::InvalidParameter(
                "erlang needs at least one stage".to_string(),
            ));
        }
        positive("mean", mean)?;
        Ok(Erlang { stages, mean })
    }

    /// Pure power-law tail `(x / x_min)^(-alpha)` on `[x_min, inf)`.
    pub fn pareto(alpha: f64, x_min: f64) -> Result<Self, ServiceError> {
        positive("x_min", x_min)?;
        if !alpha.is_finite() || alpha <= 1.0 {
            return Err(ServiceError::InvalidParameter(format!(
                "pareto alpha must exceed 1 for a finite mean, got {alpha}"
            )));
        }
        Ok(Pareto { alpha, x_min })
    }

    /// Pareto with the scale chosen so the mean equals `mean`.
    pub fn pareto_from_mean(alpha: f64, mean: f64) -> Result<Self, ServiceError> {
        positive("mean", mean)?;
        if !alpha.is_finite() || alpha <= 1.0 {
            return Err(ServiceError::InvalidParameter(format!(
                "pareto alpha must exceed 1 for a finite mean, got {alpha}"
            )));
        }
        Self::pareto(alpha, mean * (alpha - 1.0) / alpha)
    }

    /// Power-law tail with logarithmic correction:
    /// `(1 + ln(x / x_min)) * (x / x_min)^(-alpha)` on `[x_min, inf)`.
    pub fn pareto_log(alpha: f64, x_min: f64) -> Result<Self, ServiceError> {
        positive("x_min", x_min)?;
        if !alpha.is_finite() || alpha <= 1.0 {
            return Err(ServiceError::InvalidParameter(format!(
                "pareto-log alpha must exceed 1 for a finite mean, got {alpha}"
            )));
        }
        Ok(ParetoLog { alpha, x_min })
    }

    /// Log-corrected Pareto with the scale chosen so the mean equals `mean`.
    pub fn pareto_log_from_mean(alpha: f64, mean: f64) -> Result<Self, ServiceError> {
        positive("mean", mean)?;
        if !alpha.is_finite() || alpha <= 1.0 {
            return Err(ServiceError::InvalidParameter(format!(
                "pareto-log alpha must exceed 1 for a finite mean, got {alpha}"
            )));
        }
        let b = 1.0 / (alpha - 1.0);
        Self::pareto_log(alpha, mean / (1.0 + b + b * b))
    }

    /// Exact mean.
    pub fn mean(&self) -> f64 {
        match self {
            Exponential { mean } => *mean,
            Deterministic { value } => *value,
            HyperExp { probs, means } => {
                probs.iter().zip(means).map(|(p, m)| p * m).sum()
            }
            Erlang { mean, .. } => *mean,
            Pareto { alpha, x_min } => alpha * x_min / (alpha - 1.0),
            ParetoLog { alpha, x_min } => {
                let b = 1.0 / (alpha - 1.0);
                x_min * (1.0 + b + b * b)
            }
        }
    }

    /// Exact second moment, or the infinity marker for regularly varying
    /// tails with `alpha <= 2`.
    pub fn second_moment(&self) -> SecondMoment {
        match self {
            Exponential { mean } => SecondMoment::Finite(2.0 * mean * mean),
            Deterministic { value } => SecondMoment::Finite(value * value),
            HyperExp { probs, means } => SecondMoment::Finite(
                probs
                    .iter()
                    .zip(means)
                    .map(|(p, m)| p * 2.0 * m * m)
                    .sum(),
            ),
            Erlang { stages, mean } => {
                let k = *stages as f64;
                SecondMoment::Finite(mean * mean * (k + 1.0) / k)
            }
            Pareto { alpha, x_min } => {
                if *alpha > 2.0 {
                    SecondMoment::Finite(alpha * x_min * x_min / (alpha - 2.0))
                } else {
                    SecondMoment::Infinite
                }
            }
            ParetoLog { alpha, x_min } => {
                if *alpha > 2.0 {
                    let c = 1.0 / (alpha - 2.0);
                    SecondMoment::Finite(x_min * x_min * (1.0 + 2.0 * c + 2.0 * c * c))
                } else {
                    SecondMoment::Infinite
                }
            }
        }
    }

    /// `(mean, second moment)` as a pair.
    pub fn moments(&self) -> (f64, SecondMoment) {
        (self.mean(), self.second_moment())
    }

    /// Mean residual service time seen by a random observer in equilibrium,
    /// `E[S^2] / (2 E[S])`. This is the workload-to-queue-length conversion
    /// factor used by the state-space-collapse experiments.
    pub fn equilibrium_residual_mean(&self) -> Result<f64, ServiceError> {
        match self.second_moment() {
            SecondMoment::Finite(s2) => Ok(s2 / (2.0 * self.mean())),
            SecondMoment::Infinite => Err(ServiceError::UnsupportedRegime(
                "equilibrium residual mean needs a finite second moment".to_string(),
            )),
        }
    }

    /// Tail function `P(S > x)`. Right-continuous, nonincreasing, `1` at 0.
    pub fn tail(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        match self {
            Exponential { mean } => (-x / mean).exp(),
            Deterministic { value } => {
                if x < *value {
                    1.0
                } else {
                    0.0
                }
            }
            HyperExp { probs, means } => probs
                .iter()
                .zip(means)
                .map(|(p, m)| p * (-x / m).exp())
                .sum(),
            Erlang { stages, mean } => {
                let nu = *stages as f64 / mean;
                let y = nu * x;
                let mut term = 1.0;
                let mut sum = 1.0;
                for j in 1..*stages {
                    term *= y / j as f64;
                    sum += term;
                }
                sum * (-y).exp()
            }
            Pareto { alpha, x_min } => {
                if x < *x_min {
                    1.0
                } else {
                    (x / x_min).powf(-alpha)
                }
            }
            ParetoLog { alpha, x_min } => {
                if x < *x_min {
                    1.0
                } else {
                    let u = x / x_min;
                    ((1.0 + u.ln()) * u.powf(-alpha)).min(1.0)
                }
            }
        }
    }

    /// Whether the tail is regularly varying with `alpha` in `(1, 2)`, the
    /// regime for heavy-tail time scaling.
    pub fn is_heavy_tailed(&self) -> bool {
        matches!(
            self,
            Pareto { alpha, .. } | ParetoLog { alpha, .. } if *alpha < 2.0
        )
    }

    /// Tail index `alpha` for the regularly varying families.
    pub fn tail_index(&self) -> Option<f64> {
        match self {
            Pareto { alpha, .. } | ParetoLog { alpha, .. } => Some(*alpha),
            _ => None,
        }
    }

    /// Inverse of the tail function for the regularly varying families: the
    /// `x >= x_min` with `tail(x) = v`, for `v` in `(0, 1]`.
    pub fn inverse_tail(&self, v: f64) -> Result<f64, ServiceError> {
        if !(v > 0.0 && v <= 1.0) {
            return Err(ServiceError::InvalidParameter(format!(
                "tail value {v} outside (0, 1]"
            )));
        }
        match self {
            Pareto { alpha, x_min } => Ok(x_min * v.powf(-1.0 / alpha)),
            ParetoLog { alpha, x_min } => {
                Ok(x_min * pareto_log_inverse_exponent(*alpha, v).exp())
            }
            _ => Err(ServiceError::UnsupportedRegime(
                "inverse tail is only defined for the Pareto families".to_string(),
            )),
        }
    }

    /// One draw from the law. Everything except the Gaussian-free mixtures
    /// goes through inverse-CDF transforms of `(0, 1]` uniforms, so the draw
    /// is a deterministic function of the rng stream.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Exponential { mean } => -mean * uniform_open_closed(rng).ln(),
            Deterministic { value } => *value,
            HyperExp { probs, means } => {
                let u: f64 = rng.random();
                let mut cum = 0.0;
                let mut mean = means[means.len() - 1];
                for (p, m) in probs.iter().zip(means) {
                    cum += p;
                    if u < cum {
                        mean = *m;
                        break;
                    }
                }
                -mean * uniform_open_closed(rng).ln()
            }
            Erlang { stages, mean } => {
                let stage_mean = mean / *stages as f64;
                let mut total = 0.0;
                for _ in 0..*stages {
                    total -= stage_mean * uniform_open_closed(rng).ln();
                }
                total
            }
            Pareto { alpha, x_min } => x_min * uniform_open_closed(rng).powf(-1.0 / alpha),
            ParetoLog { alpha, x_min } => {
                x_min * pareto_log_inverse_exponent(*alpha, uniform_open_closed(rng)).exp()
            }
        }
    }

    /// The heavy-tail time constant: the smallest `x >= x_min` with
    /// `x * tail(x) <= 1/r`, located by a doubling search followed by
    /// bisection on the eventually decreasing map `x -> x * tail(x)`.
    ///
    /// Only defined for the regularly varying families with `alpha` in
    /// `(1, 2)` and `r >= 1`. If the map is already at or below `1/r` at
    /// `x_min`, the solution sits on the boundary and is flagged.
    pub fn solve_cr(&self, r: f64) -> Result<CrSolution, ServiceError> {
        let x_min = match self {
            Pareto { alpha, x_min } | ParetoLog { alpha, x_min } => {
                if *alpha >= 2.0 {
                    return Err(ServiceError::UnsupportedRegime(format!(
                        "c_r requires tail index in (1, 2), got {alpha}"
                    )));
                }
                *x_min
            }
            _ => {
                return Err(ServiceError::UnsupportedRegime(
                    "c_r requires a regularly varying tail".to_string(),
                ))
            }
        };
        if !r.is_finite() || r < 1.0 {
            return Err(ServiceError::InvalidParameter(format!(
                "scale parameter r must be >= 1, got {r}"
            )));
        }
        let target = 1.0 / r;
        let map = |x: f64| x * self.tail(x);
        if map(x_min) <= target {
            return Ok(CrSolution {
                c_r: x_min,
                at_boundary: true,
            });
        }
        // Doubling search: the map rises from x_min (at most briefly for the
        // log-corrected tail) and then decays like x^(1 - alpha), so the
        // first doubled point at or below the target brackets the
        // downcrossing.
        let mut lo = x_min;
        let mut hi = x_min;
        for _ in 0..4096 {
            hi *= 2.0;
            if map(hi) <= target {
                break;
            }
            lo = hi;
        }
        if map(hi) > target {
            return Err(ServiceError::InvalidParameter(format!(
                "c_r doubling search did not bracket a solution for r = {r}"
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if map(mid) <= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(CrSolution {
            c_r: hi,
            at_boundary: false,
        })
    }

    /// Short name used in experiment outputs.
    pub fn label(&self) -> String {
        match self {
            Exponential { .. } => "exponential".to_string(),
            Deterministic { .. } => "deterministic".to_string(),
            HyperExp { .. } => "hyperexp".to_string(),
            Erlang { stages, .. } => format!("erlang{stages}"),
            Pareto { alpha, .. } => format!("pareto{alpha}"),
            ParetoLog { alpha, .. } => format!("paretolog{alpha}"),
        }
    }
}

/// Uniform draw in `(0, 1]`, the natural domain for inverse-tail transforms.
fn uniform_open_closed<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Solves `(1 + y) * exp(-alpha * y) = v` for `y >= 0`, i.e. the tail
/// exponent of the log-corrected Pareto. The left side is strictly
/// decreasing in `y` for `alpha > 1`, so a bracketed Newton iteration on
/// `g(y) = ln(1 + y) - alpha * y - ln v` converges quickly.
fn pareto_log_inverse_exponent(alpha: f64, v: f64) -> f64 {
    if v >= 1.0 {
        return 0.0;
    }
    let ln_v = v.ln();
    let g = |y: f64| (1.0 + y).ln() - alpha * y - ln_v;
    let mut lo = 0.0;
    let mut hi = (-ln_v / alpha).max(1e-12);
    while g(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut y = (-ln_v / alpha).min(hi).max(lo);
    for _ in 0..100 {
        let gy = g(y);
        if gy > 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let deriv = 1.0 / (1.0 + y) - alpha;
        let step = gy / deriv;
        let mut next = y - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() <= 1e-15 * (1.0 + y.abs()) {
            return next;
        }
        y = next;
    }
    y
}
