//! Property tests for the structural invariants: rate rows, shift rules,
//! work conservation, and test-statistic symmetries.

use proptest::prelude::*;
use symq_core::disciplines::{Discipline, Extension, ROW_SUM_TOL};
use symq_core::engine::{simulate_with_arrivals, QueueState, SimConfig};
use symq_core::stats::{ks_two_sample, Ecdf};

fn table_strategy() -> impl Strategy<Value = Discipline> {
    // Triangular tables with up to 6 rows of positive-or-zero weights, at
    // least one positive entry per row.
    (1usize..=6)
        .prop_flat_map(|rows| {
            let mut row_strategies = Vec::new();
            for n in 1..=rows {
                row_strategies.push(proptest::collection::vec(0.0f64..10.0, n));
            }
            (row_strategies, proptest::bool::ANY)
        })
        .prop_filter_map("rows need a positive entry", |(mut rows, repeat)| {
            for row in rows.iter_mut() {
                if row.iter().all(|&w| w == 0.0) {
                    row[0] = 1.0;
                }
            }
            let extension = if repeat {
                Extension::RepeatLastRow
            } else {
                Extension::Uniform
            };
            Discipline::table(rows, extension).ok()
        })
}

fn discipline_strategy() -> impl Strategy<Value = Discipline> {
    prop_oneof![
        Just(Discipline::ps()),
        Just(Discipline::lcfs()),
        table_strategy(),
    ]
}

proptest! {
    #[test]
    fn rate_rows_are_stochastic(d in discipline_strategy(), n in 1usize..200) {
        let row = d.rates(n);
        prop_assert_eq!(row.len(), n);
        prop_assert!(row.iter().all(|&g| g >= 0.0));
        let sum: f64 = row.iter().sum();
        prop_assert!((sum - 1.0).abs() <= ROW_SUM_TOL);
    }

    #[test]
    fn insertion_position_is_in_range(
        d in discipline_strategy(),
        n_before in 0usize..50,
        u in 0.0f64..1.0,
    ) {
        let pos = d.insertion_position(n_before, u).unwrap();
        prop_assert!(pos >= 1 && pos <= n_before + 1);
    }

    #[test]
    fn arrive_then_depart_restores_the_state(
        mut residuals in proptest::collection::vec(0.01f64..100.0, 0..20),
        work in 0.01f64..100.0,
        pos_seed in 0usize..21,
    ) {
        let mut s = QueueState::with_residuals(residuals.clone());
        let pos = pos_seed % (residuals.len() + 1) + 1;
        s.arrive(work, pos).unwrap();
        prop_assert_eq!(s.len(), residuals.len() + 1);
        prop_assert_eq!(s.residuals()[pos - 1], work);
        let removed = s.depart(pos).unwrap();
        prop_assert_eq!(removed, work);
        prop_assert_eq!(s.residuals(), &residuals[..]);
        residuals.clear();
    }

    #[test]
    fn scripted_runs_conserve_work(
        gaps in proptest::collection::vec(0.001f64..2.0, 1..60),
        works in proptest::collection::vec(0.01f64..5.0, 60),
        seed in 0u64..1000,
    ) {
        let mut t = 0.0;
        let arrivals: Vec<(f64, f64)> = gaps
            .iter()
            .zip(&works)
            .map(|(&g, &w)| {
                t += g;
                (t, w)
            })
            .collect();
        let horizon = t + 1.0;
        let cfg = SimConfig::new(horizon);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        use rand_chacha::rand_core::SeedableRng;
        let path = simulate_with_arrivals(&Discipline::ps(), &arrivals, &cfg, &mut rng).unwrap();
        prop_assert!(path.work_balance_gap() < 1e-9);
        prop_assert!(path.conservation_drift < 1e-9 * (1 + path.event_count) as f64);
    }

    #[test]
    fn ecdf_is_monotone_with_unit_range(sample in proptest::collection::vec(-1e6f64..1e6, 1..200)) {
        let e = Ecdf::new(sample.clone()).unwrap();
        let mut xs = sample;
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut prev = 0.0;
        for &x in &xs {
            let v = e.eval(x);
            prop_assert!(v >= prev);
            prop_assert!((0.0..=1.0).contains(&v));
            prev = v;
        }
        prop_assert_eq!(e.eval(f64::NEG_INFINITY), 0.0);
        prop_assert_eq!(e.eval(f64::INFINITY), 1.0);
    }

    #[test]
    fn ks_statistic_ignores_sample_order(
        a in proptest::collection::vec(-100.0f64..100.0, 1..60),
        b in proptest::collection::vec(-100.0f64..100.0, 1..60),
        swap in proptest::bool::ANY,
    ) {
        let mut a_perm = a.clone();
        a_perm.reverse();
        let r1 = ks_two_sample(&a, &b).unwrap();
        let r2 = ks_two_sample(&a_perm, &b).unwrap();
        prop_assert_eq!(r1.statistic, r2.statistic);
        // Symmetry in the two samples as well.
        if swap {
            let r3 = ks_two_sample(&b, &a).unwrap();
            prop_assert_eq!(r1.statistic, r3.statistic);
        }
    }
}
