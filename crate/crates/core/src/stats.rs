//! Statistical machinery: ECDFs, Kolmogorov-Smirnov and chi-square tests,
//! regenerative-ratio confidence intervals, and busy-cycle tail curves.
//!
//! The KS p-values use the asymptotic Kolmogorov distribution with the
//! usual small-sample correction; sample sizes in the experiments are in
//! the thousands, where the approximation is comfortably accurate.

use crate::engine::CycleStats;
use crate::special::{chi_square_sf, kolmogorov_sf};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty sample")]
    EmptySample,
    #[error("sample contains a non-finite value")]
    NonFiniteSample,
    #[error("need at least {needed} cycles, got {got}")]
    TooFewCycles { needed: usize, got: usize },
    #[error("invalid statistics input: {0}")]
    InvalidInput(String),
}

/// Empirical CDF: a right-continuous step function from 0 to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(mut sample: Vec<f64>) -> Result<Self, StatsError> {
        if sample.is_empty() {
            return Err(StatsError::EmptySample);
        }
        if sample.iter().any(|x| !x.is_finite()) {
            return Err(StatsError::NonFiniteSample);
        }
        sample.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        Ok(Ecdf { sorted: sample })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Fraction of the sample at or below `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let idx = self.sorted.partition_point(|&v| v <= x);
        idx as f64 / self.sorted.len() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }
}

/// Outcome of a hypothesis test.
///
/// `degenerate` marks tests that could not discriminate (all mass in one
/// cell, single observation); such results carry `p_value = 1` and are never
/// counted as rejections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
    pub degenerate: bool,
}

impl TestResult {
    pub fn rejected_at(&self, alpha: f64) -> bool {
        !self.degenerate && self.p_value < alpha
    }

    fn degenerate(n1: usize, n2: usize) -> Self {
        TestResult {
            statistic: 0.0,
            p_value: 1.0,
            n1,
            n2,
            degenerate: true,
        }
    }
}

fn sorted_copy(sample: &[f64]) -> Result<Vec<f64>, StatsError> {
    if sample.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFiniteSample);
    }
    let mut v = sample.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    Ok(v)
}

fn ks_p_value(statistic: f64, effective_n: f64) -> f64 {
    let root = effective_n.sqrt();
    kolmogorov_sf((root + 0.12 + 0.11 / root) * statistic)
}

/// Two-sample Kolmogorov-Smirnov test: the statistic is the largest gap
/// between the two empirical CDFs.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    let xs = sorted_copy(a)?;
    let ys = sorted_copy(b)?;
    let (n, m) = (xs.len(), ys.len());
    let mut i = 0;
    let mut j = 0;
    let mut statistic: f64 = 0.0;
    while i < n && j < m {
        let cur = xs[i].min(ys[j]);
        while i < n && xs[i] == cur {
            i += 1;
        }
        while j < m && ys[j] == cur {
            j += 1;
        }
        let gap = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        statistic = statistic.max(gap);
    }
    let effective = (n * m) as f64 / (n + m) as f64;
    Ok(TestResult {
        statistic,
        p_value: ks_p_value(statistic, effective),
        n1: n,
        n2: m,
        degenerate: false,
    })
}

/// One-sample Kolmogorov-Smirnov test against a reference CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(a: &[f64], cdf: F) -> Result<TestResult, StatsError> {
    let xs = sorted_copy(a)?;
    let statistic = ks_statistic_one_sample(&xs, &cdf);
    Ok(TestResult {
        statistic,
        p_value: ks_p_value(statistic, xs.len() as f64),
        n1: xs.len(),
        n2: 0,
        degenerate: false,
    })
}

fn ks_statistic_one_sample<F: Fn(f64) -> f64>(sorted: &[f64], cdf: &F) -> f64 {
    let n = sorted.len() as f64;
    let mut statistic: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        statistic = statistic.max(f - i as f64 / n);
        statistic = statistic.max((i + 1) as f64 / n - f);
    }
    statistic
}

/// Kolmogorov distance between a discrete law (atoms with probabilities)
/// and a continuous reference CDF. Both the left and right limits of the
/// step CDF are compared at every atom.
pub fn ks_distance_discrete_vs_cdf<F: Fn(f64) -> f64>(atoms: &[(f64, f64)], cdf: F) -> f64 {
    let mut sorted: Vec<(f64, f64)> = atoms.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite atoms"));
    let mut cum = 0.0;
    let mut distance: f64 = 0.0;
    for &(x, p) in &sorted {
        let g = cdf(x);
        distance = distance.max((cum - g).abs());
        cum += p;
        distance = distance.max((cum - g).abs());
    }
    distance
}

/// Two-sample chi-square homogeneity test over integer-indexed counts.
///
/// Shorter count vectors are zero-padded, empty columns are dropped, and
/// tail cells (largest index first) are merged downward until every
/// remaining cell has expected count at least 5 under homogeneity. The
/// statistic has `cells - 1` degrees of freedom.
pub fn chi_square_pmf(a: &[u64], b: &[u64]) -> Result<TestResult, StatsError> {
    let cells = a.len().max(b.len());
    if cells == 0 {
        return Err(StatsError::EmptySample);
    }
    let at = |v: &[u64], k: usize| v.get(k).copied().unwrap_or(0);
    let n_a: u64 = a.iter().sum();
    let n_b: u64 = b.iter().sum();
    if n_a == 0 || n_b == 0 {
        return Err(StatsError::EmptySample);
    }
    let mut cols: Vec<(f64, f64)> = (0..cells)
        .map(|k| (at(a, k) as f64, at(b, k) as f64))
        .filter(|&(x, y)| x + y > 0.0)
        .collect();

    let total = (n_a + n_b) as f64;
    let min_row = n_a.min(n_b) as f64;
    // Pool the tail until the last cell's smallest expected count is >= 5.
    while cols.len() > 1 {
        let last = cols[cols.len() - 1];
        let expected = min_row * (last.0 + last.1) / total;
        if expected >= 5.0 {
            break;
        }
        let merged = cols.pop().expect("nonempty");
        let tail = cols.last_mut().expect("len > 1");
        tail.0 += merged.0;
        tail.1 += merged.1;
    }

    if cols.len() <= 1 {
        return Ok(TestResult::degenerate(n_a as usize, n_b as usize));
    }

    let (n_a, n_b) = (n_a as f64, n_b as f64);
    let mut statistic = 0.0;
    for &(x, y) in &cols {
        let col = x + y;
        let ea = n_a * col / total;
        let eb = n_b * col / total;
        statistic += (x - ea) * (x - ea) / ea + (y - eb) * (y - eb) / eb;
    }
    let df = cols.len() - 1;
    Ok(TestResult {
        statistic,
        p_value: chi_square_sf(statistic, df),
        n1: n_a as usize,
        n2: n_b as usize,
        degenerate: false,
    })
}

/// A ratio estimate with its jackknife 95% confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioCi {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    pub se: f64,
}

/// Minimum number of cycles for a regenerative interval.
pub const MIN_CYCLES: usize = 30;

/// Regenerative ratio estimator `sum f(cycle) / sum cycle_length` with a
/// jackknife standard error; estimates the long-run time average of the
/// quantity whose per-cycle integral is `f`.
pub fn regenerative_ci<F>(cycles: &[CycleStats], f: F) -> Result<RatioCi, StatsError>
where
    F: Fn(&CycleStats) -> f64,
{
    regenerative_ratio_ci(cycles, f, |c| c.cycle_length)
}

/// General regenerative ratio `sum f / sum g` with jackknife CI. Use
/// `g = 1` for per-cycle probabilities and `g = cycle_length` for time
/// averages.
pub fn regenerative_ratio_ci<F, G>(
    cycles: &[CycleStats],
    f: F,
    g: G,
) -> Result<RatioCi, StatsError>
where
    F: Fn(&CycleStats) -> f64,
    G: Fn(&CycleStats) -> f64,
{
    let n = cycles.len();
    if n < MIN_CYCLES {
        return Err(StatsError::TooFewCycles {
            needed: MIN_CYCLES,
            got: n,
        });
    }
    let num: Vec<f64> = cycles.iter().map(&f).collect();
    let den: Vec<f64> = cycles.iter().map(&g).collect();
    let num_sum: f64 = num.iter().sum();
    let den_sum: f64 = den.iter().sum();
    if den_sum == 0.0 {
        return Err(StatsError::InvalidInput(
            "ratio denominator sums to zero".to_string(),
        ));
    }
    let estimate = num_sum / den_sum;

    // Leave-one-out replicates of the ratio.
    let mut mean_loo = 0.0;
    let loo: Vec<f64> = (0..n)
        .map(|j| {
            let r = (num_sum - num[j]) / (den_sum - den[j]);
            mean_loo += r;
            r
        })
        .collect();
    mean_loo /= n as f64;
    let var: f64 = loo.iter().map(|r| (r - mean_loo) * (r - mean_loo)).sum::<f64>()
        * (n as f64 - 1.0)
        / n as f64;
    let se = var.max(0.0).sqrt();
    Ok(RatioCi {
        estimate,
        lo: estimate - 1.96 * se,
        hi: estimate + 1.96 * se,
        se,
    })
}

/// One point of the busy-cycle maximum tail curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailPoint {
    pub x: usize,
    /// Fraction of cycles whose maximum queue length exceeds `x`.
    pub p: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Empirical tail of the per-cycle maximum queue length, `P(max_q > x)`
/// over the grid, with Wilson 95% intervals (one-sided-friendly at the
/// extremes).
pub fn tail_curve(cycles: &[CycleStats], x_grid: &[usize]) -> Vec<TailPoint> {
    let n = cycles.len() as f64;
    x_grid
        .iter()
        .map(|&x| {
            let hits = cycles.iter().filter(|c| c.max_q > x).count() as f64;
            let p = if n > 0.0 { hits / n } else { 0.0 };
            let (lo, hi) = wilson_interval(p, n, 1.96);
            TailPoint { x, p, lo, hi }
        })
        .collect()
}

fn wilson_interval(p: f64, n: f64, z: f64) -> (f64, f64) {
    if n == 0.0 {
        return (0.0, 1.0);
    }
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}
