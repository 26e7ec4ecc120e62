//! Heavy-traffic experiment harnesses.
//!
//! The load is driven toward one along `lambda_r = (1 - beta / r) / m`, so
//! that `r (1 - rho_r) = beta` by construction. Two space/time rescalings
//! are supported:
//!
//! - diffusion: `Qhat(t) = Q(r^2 t) / r`, the finite-variance regime;
//! - heavy tail: `Qhat(t) = Q(c_r t) / r`, with `c_r` solving
//!   `c_r * tail(c_r) = 1/r`, for regularly varying service tails with
//!   index in `(1, 2)`.
//!
//! The experiments in this module produce the raw material for the
//! distributional claims about the rescaled queue: fixed-time marginal
//! laws across disciplines, the scaled stationary law against the unit
//! exponential, workload/queue-length collapse pairs, and two-time joint
//! samples. Replications fan out over a rayon pool with one ChaCha stream
//! per `(arm, replication)` pair, so results are independent of thread
//! count.

use crate::disciplines::Discipline;
use crate::engine::{self, CycleStats, EngineError, SamplePath, SimConfig};
use crate::replication_rng;
use crate::service_dist::{CrSolution, ServiceDistribution, ServiceError};
use crate::stats::{self, StatsError, TestResult};
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScalingError {
    #[error("invalid scaling parameter: {0}")]
    InvalidParameter(String),
    #[error("path covers raw time {covered} but the rescaling needs {needed}")]
    GridCoverage { needed: f64, covered: f64 },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Arrival rate `(1 - beta / r) / m`, which satisfies
/// `r (1 - lambda_r m) = beta` by construction. `beta <= 0` (critical or
/// overloaded) is allowed here; stability checks live on [`ScalingParams`].
pub fn lambda_r(r: f64, beta: f64, mean_service: f64) -> Result<f64, ScalingError> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(ScalingError::InvalidParameter(format!(
            "scale parameter r must be positive, got {r}"
        )));
    }
    if !(mean_service > 0.0) {
        return Err(ScalingError::InvalidParameter(format!(
            "service mean must be positive, got {mean_service}"
        )));
    }
    if beta > r {
        return Err(ScalingError::InvalidParameter(format!(
            "beta = {beta} exceeds r = {r}, giving a negative arrival rate"
        )));
    }
    Ok((1.0 - beta / r) / mean_service)
}

/// Which time compression the experiment applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeScaling {
    /// Time by `r^2`, space by `r`.
    Diffusion,
    /// Time by `c_r`, space by `r`.
    HeavyTail,
}

/// One heavy-traffic operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingParams {
    pub r: f64,
    pub beta: f64,
    pub mean_service: f64,
    pub lambda_r: f64,
    /// Present for heavy-tail scaled points.
    pub c_r: Option<CrSolution>,
}

impl ScalingParams {
    pub fn diffusion(r: f64, beta: f64, mean_service: f64) -> Result<Self, ScalingError> {
        let lambda = lambda_r(r, beta, mean_service)?;
        Ok(ScalingParams {
            r,
            beta,
            mean_service,
            lambda_r: lambda,
            c_r: None,
        })
    }

    pub fn heavy_tail(
        r: f64,
        beta: f64,
        service: &ServiceDistribution,
    ) -> Result<Self, ScalingError> {
        let lambda = lambda_r(r, beta, service.mean())?;
        let c_r = service.solve_cr(r)?;
        Ok(ScalingParams {
            r,
            beta,
            mean_service: service.mean(),
            lambda_r: lambda,
            c_r: Some(c_r),
        })
    }

    pub fn rho(&self) -> f64 {
        self.lambda_r * self.mean_service
    }

    /// Stable means `beta > 0`, i.e. `rho_r < 1`.
    pub fn is_stable(&self) -> bool {
        self.beta > 0.0
    }

    /// Raw-time compression factor for the chosen regime.
    pub fn time_factor(&self, scaling: TimeScaling) -> Result<f64, ScalingError> {
        match scaling {
            TimeScaling::Diffusion => Ok(self.r * self.r),
            TimeScaling::HeavyTail => self
                .c_r
                .map(|c| c.c_r)
                .ok_or_else(|| {
                    ScalingError::InvalidParameter(
                        "heavy-tail scaling needs c_r; construct with heavy_tail()".to_string(),
                    )
                }),
        }
    }
}

/// A rescaled observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledSample {
    /// Rescaled time `raw_time / time_factor`.
    pub time: f64,
    /// `Q(raw_time) / r`.
    pub q_hat: f64,
    /// `W(raw_time) / r`.
    pub w_hat: f64,
}

/// A path in rescaled coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledPath {
    pub r: f64,
    pub time_factor: f64,
    pub samples: Vec<ScaledSample>,
}

fn rescale(path: &SamplePath, r: f64, time_factor: f64, t_max: f64) -> Result<ScaledPath, ScalingError> {
    if !(r > 0.0) || !(time_factor > 0.0) {
        return Err(ScalingError::InvalidParameter(format!(
            "need positive r and time factor, got r={r}, factor={time_factor}"
        )));
    }
    let needed = time_factor * t_max;
    let covered = path.samples.last().map(|s| s.time).unwrap_or(0.0);
    if covered + 1e-9 * needed.max(1.0) < needed {
        return Err(ScalingError::GridCoverage { needed, covered });
    }
    Ok(ScaledPath {
        r,
        time_factor,
        samples: path
            .samples
            .iter()
            .map(|s| ScaledSample {
                time: s.time / time_factor,
                q_hat: s.queue_len as f64 / r,
                w_hat: s.workload / r,
            })
            .collect(),
    })
}

/// Diffusion rescaling `Qhat(t) = Q(r^2 t) / r` of a recorded path; the
/// path must cover raw time `r^2 * t_max`.
pub fn diffusion_scale(path: &SamplePath, r: f64, t_max: f64) -> Result<ScaledPath, ScalingError> {
    rescale(path, r, r * r, t_max)
}

/// Heavy-tail rescaling `Qhat(t) = Q(c_r t) / r`; the path must cover raw
/// time `c_r * t_max`.
pub fn heavy_tail_scale(
    path: &SamplePath,
    r: f64,
    c_r: f64,
    t_max: f64,
) -> Result<ScaledPath, ScalingError> {
    rescale(path, r, c_r, t_max)
}

/// Evenly spaced rescaled observation times `step, 2 step, ..., t_max`,
/// with time zero included.
pub fn rescaled_grid(t_max: f64, step: f64) -> Vec<f64> {
    let n = (t_max / step).round() as usize;
    (0..=n).map(|k| k as f64 * step).collect()
}

/// Simulates one replication to raw time `raw_t` and returns the final
/// queue length and workload.
fn terminal_state(
    discipline: &Discipline,
    service: &ServiceDistribution,
    lambda: f64,
    raw_t: f64,
    rng: &mut impl Rng,
) -> Result<(usize, f64), EngineError> {
    let cfg = SimConfig::new(raw_t).with_grid(vec![raw_t]);
    let path = engine::simulate(discipline, service, lambda, &cfg, rng)?;
    let s = path.samples.last().expect("grid has one point");
    Ok((s.queue_len, s.workload))
}

/// Per-discipline counts of the queue length observed at one fixed
/// (rescaled) time, plus all pairwise homogeneity tests.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalOutcome {
    pub r: f64,
    pub t: f64,
    pub raw_t: f64,
    pub replications: usize,
    /// `counts[arm][k]` = number of replications of `arm` that ended with
    /// `k` customers.
    pub counts: Vec<Vec<u64>>,
    pub pairwise: Vec<PairwiseTest>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseTest {
    pub a: usize,
    pub b: usize,
    pub result: TestResult,
}

impl MarginalOutcome {
    /// Empirical pmf of one arm.
    pub fn pmf(&self, arm: usize) -> Vec<f64> {
        let total: u64 = self.counts[arm].iter().sum();
        self.counts[arm]
            .iter()
            .map(|&c| c as f64 / total as f64)
            .collect()
    }
}

/// The fixed-time marginal experiment: independent replications per
/// discipline, all started empty, each observed once at rescaled time `t`.
///
/// The marginal law of the queue length at a fixed time is expected to be
/// discipline-independent under Poisson arrivals from an empty start; the
/// pairwise chi-square results quantify that. Replications are independent
/// across arms (no shared randomness) because the claim is distributional,
/// not pathwise.
pub fn transient_marginal_experiment(
    disciplines: &[Discipline],
    service: &ServiceDistribution,
    params: &ScalingParams,
    t: f64,
    scaling: TimeScaling,
    replications: usize,
    seed: u64,
) -> Result<MarginalOutcome, ScalingError> {
    if disciplines.len() < 2 {
        return Err(ScalingError::InvalidParameter(
            "marginal comparison needs at least two arms".to_string(),
        ));
    }
    if replications == 0 {
        return Err(ScalingError::InvalidParameter(
            "need at least one replication".to_string(),
        ));
    }
    let raw_t = params.time_factor(scaling)? * t;
    let lambda = params.lambda_r;

    let mut counts: Vec<Vec<u64>> = Vec::with_capacity(disciplines.len());
    for (arm, d) in disciplines.iter().enumerate() {
        let lens: Vec<usize> = (0..replications)
            .into_par_iter()
            .map(|rep| {
                let mut rng = replication_rng(seed, arm as u32, rep as u32);
                terminal_state(d, service, lambda, raw_t, &mut rng).map(|(q, _)| q)
            })
            .collect::<Result<_, _>>()?;
        let max_len = lens.iter().copied().max().unwrap_or(0);
        let mut c = vec![0u64; max_len + 1];
        for l in lens {
            c[l] += 1;
        }
        counts.push(c);
    }

    let mut pairwise = Vec::new();
    for a in 0..counts.len() {
        for b in (a + 1)..counts.len() {
            pairwise.push(PairwiseTest {
                a,
                b,
                result: stats::chi_square_pmf(&counts[a], &counts[b])?,
            });
        }
    }
    Ok(MarginalOutcome {
        r: params.r,
        t,
        raw_t,
        replications,
        counts,
        pairwise,
    })
}

/// Scaled stationary law of one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryLimitPoint {
    pub r: f64,
    pub rho: f64,
    /// Time-weighted stationary pmf of the queue length.
    pub pmf: Vec<f64>,
    /// Atoms of the scaled law `(1 - rho) * Q(infinity)`.
    pub scaled_atoms: Vec<(f64, f64)>,
    /// Kolmogorov distance of the scaled law to the unit exponential.
    pub ks_to_unit_exp: f64,
    pub cycles_used: usize,
}

/// Estimates the stationary law of `(1 - rho_r) Q(infinity)` per `r` via the
/// regenerative method and reports its Kolmogorov distance to the unit-mean
/// exponential, in increasing `r` order.
///
/// The stationary pmf is the exact time-weighted occupancy over complete
/// regeneration cycles, which is what sampling the queue at a uniform time
/// (cycles weighted by length) converges to.
pub fn stationary_limit_experiment(
    discipline: &Discipline,
    service: &ServiceDistribution,
    r_list: &[f64],
    beta: f64,
    cycles_per_r: usize,
    seed: u64,
) -> Result<Vec<StationaryLimitPoint>, ScalingError> {
    let mut rs = r_list.to_vec();
    rs.sort_by(|a, b| a.partial_cmp(b).expect("finite r"));
    let mut out = Vec::with_capacity(rs.len());
    for (arm, &r) in rs.iter().enumerate() {
        let params = ScalingParams::diffusion(r, beta, service.mean())?;
        let point = if params.lambda_r == 0.0 {
            // No arrivals at all: the queue is empty forever and the scaled
            // law is the point mass at zero.
            StationaryLimitPoint {
                r,
                rho: 0.0,
                pmf: vec![1.0],
                scaled_atoms: vec![(0.0, 1.0)],
                ks_to_unit_exp: 1.0,
                cycles_used: 0,
            }
        } else {
            if !params.is_stable() {
                return Err(ScalingError::Engine(EngineError::Unstable {
                    rho: params.rho(),
                }));
            }
            let cycles = collect_cycles_parallel(
                discipline,
                service,
                params.lambda_r,
                cycles_per_r,
                seed,
                arm as u32,
            )?;
            let pmf = occupancy_pmf(&cycles);
            let scale = 1.0 - params.rho();
            let scaled_atoms: Vec<(f64, f64)> = pmf
                .iter()
                .enumerate()
                .map(|(k, &p)| (scale * k as f64, p))
                .collect();
            let ks = stats::ks_distance_discrete_vs_cdf(&scaled_atoms, unit_exp_cdf);
            StationaryLimitPoint {
                r,
                rho: params.rho(),
                pmf,
                scaled_atoms,
                ks_to_unit_exp: ks,
                cycles_used: cycles.len(),
            }
        };
        out.push(point);
    }
    Ok(out)
}

/// Unit-mean exponential CDF.
pub fn unit_exp_cdf(x: f64) -> f64 {
    if x < 0.0 {
        0.0
    } else {
        1.0 - (-x).exp()
    }
}

/// Kolmogorov distance between the scaled geometric stationary law at load
/// `rho` and the unit exponential, by direct supremum over the atoms.
pub fn geometric_scaled_ks_to_unit_exp(rho: f64) -> f64 {
    assert!((0.0..1.0).contains(&rho), "load must be in [0, 1)");
    let scale = 1.0 - rho;
    let mut distance: f64 = 0.0;
    let mut k = 0u32;
    loop {
        let g = unit_exp_cdf(scale * k as f64);
        let left = 1.0 - rho.powi(k as i32);
        let right = 1.0 - rho.powi(k as i32 + 1);
        distance = distance.max((left - g).abs()).max((right - g).abs());
        if rho.powi(k as i32) < 1e-16 {
            return distance;
        }
        k += 1;
    }
}

/// Collects regeneration cycles split over a fixed number of independent
/// chunks so the work can spread across threads while the result stays
/// independent of thread count.
pub fn collect_cycles_parallel(
    discipline: &Discipline,
    service: &ServiceDistribution,
    lambda: f64,
    n_cycles: usize,
    seed: u64,
    arm: u32,
) -> Result<Vec<CycleStats>, ScalingError> {
    const CHUNKS: usize = 16;
    let chunks = CHUNKS.min(n_cycles.max(1));
    let base = n_cycles / chunks;
    let extra = n_cycles % chunks;
    let sizes: Vec<usize> = (0..chunks)
        .map(|i| base + usize::from(i < extra))
        .collect();
    let nested: Vec<Vec<CycleStats>> = sizes
        .into_par_iter()
        .enumerate()
        .map(|(i, size)| {
            let mut rng = replication_rng(seed, arm, i as u32);
            engine::busy_cycles(discipline, service, lambda, size, &mut rng)
        })
        .collect::<Result<_, _>>()?;
    Ok(nested.into_iter().flatten().collect())
}

/// Time-weighted stationary pmf from cycle occupancies.
pub fn occupancy_pmf(cycles: &[CycleStats]) -> Vec<f64> {
    let max_len = cycles.iter().map(|c| c.occupancy.len()).max().unwrap_or(0);
    let mut occ = vec![0.0; max_len];
    let mut total = 0.0;
    for c in cycles {
        for (k, &t) in c.occupancy.iter().enumerate() {
            occ[k] += t;
        }
        total += c.cycle_length;
    }
    occ.iter_mut().for_each(|p| *p /= total);
    occ
}

/// Draws `n` independent stationary observations as counts by queue length,
/// i.e. a multinomial sample from the time-weighted pmf. This realizes
/// "sample the queue at a uniform time, cycles weighted by length".
pub fn sample_stationary_counts<R: Rng + ?Sized>(
    pmf: &[f64],
    n: usize,
    rng: &mut R,
) -> Vec<u64> {
    let mut counts = vec![0u64; pmf.len().max(1)];
    for _ in 0..n {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        let mut chosen = pmf.len().saturating_sub(1);
        for (k, &p) in pmf.iter().enumerate() {
            cum += p;
            if u < cum {
                chosen = k;
                break;
            }
        }
        counts[chosen] += 1;
    }
    counts
}

/// Joint samples of the rescaled queue length and the rescaled, converted
/// workload at one fixed time.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapseOutcome {
    pub r: f64,
    pub t: f64,
    /// Workload-to-queue-length conversion factor `2m / E[S^2]`.
    pub ratio: f64,
    /// `(Qhat(t), What(t) * ratio)` per replication.
    pub pairs: Vec<(f64, f64)>,
    pub correlation: f64,
    pub mean_abs_deviation: f64,
}

/// State-space-collapse experiment: in heavy traffic the queue length
/// should track `workload * 2m / E[S^2]`; this measures how tightly, at
/// rescaled time `t`, over independent replications.
pub fn collapse_check(
    discipline: &Discipline,
    service: &ServiceDistribution,
    params: &ScalingParams,
    t: f64,
    replications: usize,
    seed: u64,
) -> Result<CollapseOutcome, ScalingError> {
    let residual_mean = service.equilibrium_residual_mean()?;
    let ratio = 1.0 / residual_mean;
    let raw_t = params.time_factor(TimeScaling::Diffusion)? * t;
    let lambda = params.lambda_r;
    let r = params.r;
    let pairs: Vec<(f64, f64)> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replication_rng(seed, 0, rep as u32);
            terminal_state(discipline, service, lambda, raw_t, &mut rng)
                .map(|(q, w)| (q as f64 / r, w / r * ratio))
        })
        .collect::<Result<_, _>>()?;

    let n = pairs.len() as f64;
    let mean_q: f64 = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_w: f64 = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_q = 0.0;
    let mut var_w = 0.0;
    let mut mad = 0.0;
    for &(q, w) in &pairs {
        cov += (q - mean_q) * (w - mean_w);
        var_q += (q - mean_q) * (q - mean_q);
        var_w += (w - mean_w) * (w - mean_w);
        mad += (q - w).abs();
    }
    let correlation = if var_q > 0.0 && var_w > 0.0 {
        cov / (var_q.sqrt() * var_w.sqrt())
    } else {
        0.0
    };
    Ok(CollapseOutcome {
        r: params.r,
        t,
        ratio,
        pairs,
        correlation,
        mean_abs_deviation: mad / n,
    })
}

/// Two-time joint samples of the rescaled queue length, one vector per
/// discipline arm. Marginals at each time agree across disciplines; the
/// joint laws need not, which is exactly what these files exhibit.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoTimeOutcome {
    pub r: f64,
    pub t1: f64,
    pub t2: f64,
    pub per_arm: Vec<Vec<(f64, f64)>>,
}

#[allow(clippy::too_many_arguments)]
pub fn two_time_experiment(
    disciplines: &[Discipline],
    service: &ServiceDistribution,
    params: &ScalingParams,
    t1: f64,
    t2: f64,
    scaling: TimeScaling,
    replications: usize,
    seed: u64,
) -> Result<TwoTimeOutcome, ScalingError> {
    if !(t1 > 0.0 && t2 > t1) {
        return Err(ScalingError::InvalidParameter(format!(
            "need 0 < t1 < t2, got t1={t1}, t2={t2}"
        )));
    }
    let factor = params.time_factor(scaling)?;
    let (raw1, raw2) = (factor * t1, factor * t2);
    let lambda = params.lambda_r;
    let r = params.r;
    let mut per_arm = Vec::with_capacity(disciplines.len());
    for (arm, d) in disciplines.iter().enumerate() {
        let samples: Vec<(f64, f64)> = (0..replications)
            .into_par_iter()
            .map(|rep| {
                let mut rng = replication_rng(seed, arm as u32, rep as u32);
                let cfg = SimConfig::new(raw2).with_grid(vec![raw1, raw2]);
                let path = engine::simulate(d, service, lambda, &cfg, &mut rng)?;
                Ok::<_, EngineError>((
                    path.samples[0].queue_len as f64 / r,
                    path.samples[1].queue_len as f64 / r,
                ))
            })
            .collect::<Result<_, _>>()?;
        per_arm.push(samples);
    }
    Ok(TwoTimeOutcome {
        r: params.r,
        t1,
        t2,
        per_arm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::PathSample;

    fn exp_service() -> ServiceDistribution {
        ServiceDistribution::exponential(1.0).unwrap()
    }

    #[test]
    fn lambda_r_examples() {
        assert!((lambda_r(10.0, 1.0, 1.0).unwrap() - 0.9).abs() < 1e-15);
        assert!((lambda_r(10.0, 0.0, 2.0).unwrap() - 0.5).abs() < 1e-15);
        let l = lambda_r(100.0, 1.0, 1.0).unwrap();
        assert!((l - 0.99).abs() < 1e-15);
        assert!((100.0 * (1.0 - l * 1.0) - 1.0).abs() <= 1e-12);
        assert!(lambda_r(0.0, 1.0, 1.0).is_err());
        assert!(lambda_r(-2.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn construction_identity_is_exact() {
        for &(r, beta, m) in &[
            (5.0, 1.0, 1.0),
            (10.0, 0.5, 2.0),
            (30.0, 2.0, 0.3),
            (1000.0, 1.0, 7.0),
        ] {
            let l = lambda_r(r, beta, m).unwrap();
            assert!(
                (r * (1.0 - l * m) - beta).abs() <= 1e-12,
                "identity violated for r={r}, beta={beta}, m={m}"
            );
        }
    }

    #[test]
    fn negative_beta_is_allowed_but_unstable() {
        let p = ScalingParams::diffusion(10.0, -1.0, 1.0).unwrap();
        assert!(!p.is_stable());
        assert!(p.rho() > 1.0);
        let p = ScalingParams::diffusion(10.0, 0.0, 1.0).unwrap();
        assert!(!p.is_stable());
    }

    fn flat_path(q: usize, workload: f64, times: &[f64]) -> SamplePath {
        SamplePath {
            samples: times
                .iter()
                .map(|&t| PathSample {
                    time: t,
                    queue_len: q,
                    workload,
                })
                .collect(),
            event_count: 0,
            final_state: crate::engine::QueueState::empty(),
            arrived_work: 0.0,
            busy_time: 0.0,
            conservation_drift: 0.0,
            events: None,
        }
    }

    #[test]
    fn diffusion_rescaling_divides_space_and_time() {
        let r = 30.0;
        let path = flat_path(30, 12.0, &[0.0, 450.0, 900.0]);
        let scaled = diffusion_scale(&path, r, 1.0).unwrap();
        assert_eq!(scaled.samples.len(), 3);
        let s = scaled.samples[2];
        assert!((s.time - 1.0).abs() < 1e-15);
        assert!((s.q_hat - 1.0).abs() < 1e-15);
        assert!((s.w_hat - 0.4).abs() < 1e-15);
        // Constant Q = r maps to Qhat identically one.
        assert!(scaled.samples.iter().all(|s| (s.q_hat - 1.0).abs() < 1e-15));
        // Empty start.
        let empty = flat_path(0, 0.0, &[0.0, 900.0]);
        let scaled = diffusion_scale(&empty, r, 1.0).unwrap();
        assert_eq!(scaled.samples[0].q_hat, 0.0);
    }

    #[test]
    fn rescaling_checks_coverage() {
        let path = flat_path(1, 1.0, &[0.0, 100.0]);
        let err = diffusion_scale(&path, 30.0, 1.0).unwrap_err();
        assert!(matches!(err, ScalingError::GridCoverage { .. }));
        // Heavy-tail factor comes from c_r instead of r^2.
        let path = flat_path(5, 1.0, &[0.0, 10_000.0]);
        let scaled = heavy_tail_scale(&path, 100.0, 1e4, 1.0).unwrap();
        assert!((scaled.samples[1].time - 1.0).abs() < 1e-15);
        assert!((scaled.samples[1].q_hat - 0.05).abs() < 1e-15);
    }

    #[test]
    fn heavy_tail_params_carry_cr() {
        let sd = ServiceDistribution::pareto(1.5, 1.0).unwrap();
        let p = ScalingParams::heavy_tail(100.0, 1.0, &sd).unwrap();
        let c = p.c_r.unwrap();
        assert!((c.c_r - 1e4).abs() < 1e-9 * 1e4);
        assert!((p.time_factor(TimeScaling::HeavyTail).unwrap() - 1e4).abs() < 1e-5);
        // Diffusion params refuse to produce a heavy-tail factor.
        let d = ScalingParams::diffusion(100.0, 1.0, 1.0).unwrap();
        assert!(d.time_factor(TimeScaling::HeavyTail).is_err());
    }

    #[test]
    fn rescaled_grid_endpoints() {
        let g = rescaled_grid(2.0, 0.01);
        assert_eq!(g.len(), 201);
        assert_eq!(g[0], 0.0);
        assert!((g[200] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn occupancy_pmf_sums_to_one() {
        let sd = exp_service();
        let cycles = collect_cycles_parallel(&Discipline::ps(), &sd, 0.5, 2_000, 7, 0).unwrap();
        assert_eq!(cycles.len(), 2_000);
        let pmf = occupancy_pmf(&cycles);
        let total: f64 = pmf.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        // Geometric shape: P(Q=0) near 1 - rho.
        assert!((pmf[0] - 0.5).abs() < 0.03, "pmf[0] = {}", pmf[0]);
    }

    #[test]
    fn parallel_cycle_collection_is_deterministic() {
        let sd = exp_service();
        let a = collect_cycles_parallel(&Discipline::ps(), &sd, 0.5, 500, 9, 0).unwrap();
        let b = collect_cycles_parallel(&Discipline::ps(), &sd, 0.5, 500, 9, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn marginal_experiment_accepts_same_law_control() {
        let sd = exp_service();
        let params = ScalingParams::diffusion(3.0, 1.0, 1.0).unwrap();
        let outcome = transient_marginal_experiment(
            &[Discipline::ps(), Discipline::ps()],
            &sd,
            &params,
            0.3,
            TimeScaling::Diffusion,
            2_000,
            11,
        )
        .unwrap();
        assert_eq!(outcome.pairwise.len(), 1);
        assert!(
            !outcome.pairwise[0].result.rejected_at(0.01),
            "control pair rejected: p = {}",
            outcome.pairwise[0].result.p_value
        );
        let pmf = outcome.pmf(0);
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn marginal_experiment_flags_single_replication() {
        let sd = exp_service();
        let params = ScalingParams::diffusion(2.0, 1.0, 1.0).unwrap();
        let outcome = transient_marginal_experiment(
            &[Discipline::ps(), Discipline::lcfs()],
            &sd,
            &params,
            0.2,
            TimeScaling::Diffusion,
            1,
            13,
        )
        .unwrap();
        assert!(outcome.pairwise[0].result.degenerate);
    }

    #[test]
    fn same_discipline_calibration_over_repeats() {
        // The same-law control must almost never reject at the 1% level:
        // at most one rejection in a hundred repeated experiments.
        let sd = exp_service();
        let params = ScalingParams::diffusion(3.0, 1.0, 1.0).unwrap();
        let mut rejections = 0;
        for rep in 0..100 {
            let outcome = transient_marginal_experiment(
                &[Discipline::ps(), Discipline::ps()],
                &sd,
                &params,
                0.3,
                TimeScaling::Diffusion,
                400,
                20_000 + rep,
            )
            .unwrap();
            if outcome.pairwise[0].result.rejected_at(0.01) {
                rejections += 1;
            }
        }
        assert!(rejections <= 1, "{rejections} control rejections in 100");
    }

    #[test]
    fn stationary_limit_handles_zero_load_edge() {
        let sd = exp_service();
        let points = stationary_limit_experiment(
            &Discipline::ps(),
            &sd,
            &[2.0],
            2.0, // beta = r: lambda_r = 0
            100,
            3,
        )
        .unwrap();
        assert_eq!(points[0].pmf, vec![1.0]);
        assert_eq!(points[0].scaled_atoms, vec![(0.0, 1.0)]);
        assert_eq!(points[0].ks_to_unit_exp, 1.0);
    }

    #[test]
    fn stationary_limit_distance_shrinks_with_r() {
        let sd = exp_service();
        let points = stationary_limit_experiment(
            &Discipline::ps(),
            &sd,
            &[10.0, 4.0], // unsorted on purpose
            1.0,
            20_000,
            17,
        )
        .unwrap();
        assert!((points[0].r - 4.0).abs() < 1e-15, "sorted ascending");
        assert!(
            points[1].ks_to_unit_exp < points[0].ks_to_unit_exp,
            "KS at r=10 ({}) should beat r=4 ({})",
            points[1].ks_to_unit_exp,
            points[0].ks_to_unit_exp
        );
        // The analytic distance for the exact geometric law is 1 - rho; the
        // empirical law should land nearby.
        for pt in &points {
            let analytic = geometric_scaled_ks_to_unit_exp(pt.rho);
            assert!(
                (pt.ks_to_unit_exp - analytic).abs() < 0.03,
                "r={}: empirical {} vs analytic {}",
                pt.r,
                pt.ks_to_unit_exp,
                analytic
            );
        }
    }

    #[test]
    fn geometric_distance_is_monotone_in_rho() {
        let d1 = geometric_scaled_ks_to_unit_exp(0.8);
        let d2 = geometric_scaled_ks_to_unit_exp(0.9);
        let d3 = geometric_scaled_ks_to_unit_exp(0.95);
        assert!(d1 > d2 && d2 > d3);
        // The atom at zero dominates the distance.
        assert!((d1 - 0.2).abs() < 1e-9);
    }

    #[test]
    fn collapse_ratio_is_unity_for_exponential_service() {
        let sd = exp_service();
        let params = ScalingParams::diffusion(5.0, 1.0, 1.0).unwrap();
        let outcome =
            collapse_check(&Discipline::ps(), &sd, &params, 0.5, 500, 23).unwrap();
        assert!((outcome.ratio - 1.0).abs() < 1e-15);
        assert!(outcome.correlation > 0.8, "corr = {}", outcome.correlation);
    }

    #[test]
    fn collapse_rejects_infinite_variance() {
        let sd = ServiceDistribution::pareto(1.5, 1.0).unwrap();
        let params = ScalingParams::diffusion(5.0, 1.0, sd.mean()).unwrap();
        assert!(matches!(
            collapse_check(&Discipline::ps(), &sd, &params, 0.5, 10, 1),
            Err(ScalingError::Service(ServiceError::UnsupportedRegime(_)))
        ));
    }

    #[test]
    fn two_time_samples_have_matching_shape() {
        let sd = exp_service();
        let params = ScalingParams::diffusion(3.0, 1.0, 1.0).unwrap();
        let out = two_time_experiment(
            &[Discipline::ps(), Discipline::lcfs()],
            &sd,
            &params,
            0.2,
            0.6,
            TimeScaling::Diffusion,
            200,
            29,
        )
        .unwrap();
        assert_eq!(out.per_arm.len(), 2);
        assert_eq!(out.per_arm[0].len(), 200);
        assert!(two_time_experiment(
            &[Discipline::ps()],
            &sd,
            &params,
            0.6,
            0.2,
            TimeScaling::Diffusion,
            10,
            1
        )
        .is_err());
    }
}
