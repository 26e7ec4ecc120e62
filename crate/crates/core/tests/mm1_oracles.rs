//! Cross-checks of the simulator against independently computed M/M/1 and
//! birth-death quantities.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use symq_core::disciplines::{Discipline, Extension};
use symq_core::engine::busy_cycles;
use symq_core::service_dist::ServiceDistribution;
use symq_core::stats::{regenerative_ci, regenerative_ratio_ci, tail_curve};

/// Probability that the M/M/1 queue-length chain started at 1 reaches `k`
/// before 0, from the jump-chain absorption system solved by forward
/// recursion (no closed form used).
fn mm1_max_reach_probability(lambda: f64, mu: f64, k: usize) -> f64 {
    assert!(k >= 1);
    // u(i) solves the interior recurrence with u(0) = 0, u(1) = 1; the
    // hitting probability from 1 is 1 / u(k) after normalizing u(k) = 1.
    let p = lambda / (lambda + mu);
    let q = mu / (lambda + mu);
    let mut u_prev = 0.0f64;
    let mut u = 1.0f64;
    for _ in 1..k {
        let next = (u - q * u_prev) / p;
        u_prev = u;
        u = next;
    }
    1.0 / u
}

#[test]
fn absorption_oracle_reproduces_known_values() {
    // Frozen spot checks of the oracle itself at lambda = 1/2, mu = 1:
    // the recursion yields u(k) = 2^k - 1.
    for (k, expect) in [(1, 1.0), (2, 1.0 / 3.0), (3, 1.0 / 7.0), (6, 1.0 / 63.0)] {
        let got = mm1_max_reach_probability(0.5, 1.0, k);
        assert!((got - expect).abs() < 1e-12, "k={k}: {got} vs {expect}");
    }
}

#[test]
fn busy_cycle_maximum_tail_matches_absorption_probabilities() {
    let sd = ServiceDistribution::exponential(1.0).unwrap();
    let lambda = 0.5;
    let n_cycles = 50_000;
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let cycles = busy_cycles(&Discipline::ps(), &sd, lambda, n_cycles, &mut rng).unwrap();
    let points = tail_curve(&cycles, &[0, 1, 2, 3, 4, 5]);
    for pt in &points {
        // P(max > x) = P(reach x + 1 before emptying).
        let expect = mm1_max_reach_probability(lambda, 1.0, pt.x + 1);
        let se = (expect * (1.0 - expect) / n_cycles as f64).sqrt();
        assert!(
            (pt.p - expect).abs() <= 4.0 * se + 1e-9,
            "x={}: empirical {} vs oracle {expect} (se {se})",
            pt.x,
            pt.p
        );
    }
}

#[test]
fn regenerative_mean_queue_matches_mm1() {
    let sd = ServiceDistribution::exponential(1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4321);
    let cycles = busy_cycles(&Discipline::ps(), &sd, 0.5, 30_000, &mut rng).unwrap();
    let ci = regenerative_ci(&cycles, |c| c.area).unwrap();
    // E[Q] = rho / (1 - rho) = 1 at rho = 1/2; allow three standard errors.
    assert!(
        (ci.estimate - 1.0).abs() <= 3.0 * ci.se,
        "estimate {} +- {}",
        ci.estimate,
        ci.se
    );
    assert!(ci.se < 0.05, "regenerative CI unexpectedly wide: {}", ci.se);
}

#[test]
fn stationary_law_is_geometric_for_every_discipline() {
    // P(Q >= k) = rho^k for PS, LCFS, and a generic table, with exponential
    // service at rho = 0.7.
    let sd = ServiceDistribution::exponential(1.0).unwrap();
    let table = Discipline::table(
        vec![vec![1.0], vec![0.6, 0.4], vec![0.5, 0.3, 0.2]],
        Extension::RepeatLastRow,
    )
    .unwrap();
    for (i, d) in [Discipline::ps(), Discipline::lcfs(), table].iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + i as u64);
        let cycles = busy_cycles(d, &sd, 0.7, 30_000, &mut rng).unwrap();
        for k in 1..=5usize {
            let ci =
                regenerative_ratio_ci(&cycles, |c| c.time_at_or_above(k), |c| c.cycle_length)
                    .unwrap();
            let expect = 0.7f64.powi(k as i32);
            assert!(
                (ci.estimate - expect).abs() <= 4.0 * ci.se + 1e-9,
                "{d:?} k={k}: {} vs {expect} (se {})",
                ci.estimate,
                ci.se
            );
        }
    }
}
