mod support;

use std::collections::BTreeMap;

use optbench_core::datastore::{export_ioh_csv, import_ioh_csv, Event, RunRecord, Trajectory};
use optbench_core::metrics::{
    aocc, arithmetic_mean, geometric_mean, loss_table, precision_at_budget, top_k_counts, AoccBounds, CellKey,
    CellStats, PerformanceTable,
};
use optbench_core::portfolio::{marginal_contribution, portfolio_value, PortfolioValueSpec};
use optbench_core::suite::{make_instance, FunctionId};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn trajectory() -> impl Strategy<Value = Trajectory> {
    (any::<u64>(), 1u64..3000).prop_map(|(seed, max)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        support::random_trajectory(&mut rng, max)
    })
}

fn record() -> impl Strategy<Value = RunRecord> {
    (any::<u64>(), 0u32..500).prop_map(|(seed, i)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        support::random_record(&mut rng, i)
    })
}

fn aocc_table(values: &[Vec<f64>]) -> PerformanceTable {
    let mut t = PerformanceTable::new();
    for (a, row) in values.iter().enumerate() {
        for (f, &v) in row.iter().enumerate() {
            t.insert(
                CellKey::new(&format!("alg{a}"), FunctionId(f as u32 + 1), 2),
                CellStats {
                    mean_aocc: v,
                    precision_at: [(10, 10f64.powf(2.0 - 10.0 * v))].into(),
                    run_count: 1,
                },
            );
        }
    }
    t
}

fn grid() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..6, 1usize..5).prop_flat_map(|(a, f)| prop::collection::vec(prop::collection::vec(0.0..=1.0f64, f), a))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn aocc_in_unit_interval_and_matches_oracle(t in trajectory()) {
        for bounds in [AoccBounds::default(), AoccBounds::large()] {
            let v = aocc(&t, bounds).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!((v - support::brute_force_aocc(&t, bounds.lb, bounds.ub)).abs() < 1e-12);
        }
    }

    #[test]
    fn aocc_improves_when_events_get_better(t in trajectory(), shift in 0.0..3.0f64) {
        let better = Trajectory::new(
            t.budget,
            t.events.iter().map(|e| Event { eval: e.eval, precision: e.precision * 10f64.powf(-shift) }).collect(),
        ).unwrap();
        let b = AoccBounds::default();
        prop_assert!(aocc(&better, b).unwrap() >= aocc(&t, b).unwrap() - 1e-15);
    }

    #[test]
    fn precision_at_budget_is_non_increasing(t in trajectory()) {
        let mut last = f64::INFINITY;
        for budget in 1..=t.budget.min(200) {
            let p = precision_at_budget(&t, budget).unwrap();
            prop_assert!(p <= last);
            last = p;
        }
        prop_assert_eq!(precision_at_budget(&t, t.budget).unwrap(), t.final_precision().unwrap().max(1e-8));
    }

    #[test]
    fn geometric_mean_bounded_by_arithmetic(values in prop::collection::vec(1e-6..1e6f64, 1..30)) {
        let g = geometric_mean(&values).unwrap();
        let a = arithmetic_mean(&values).unwrap();
        prop_assert!(g <= a * (1.0 + 1e-12));
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(g >= min * (1.0 - 1e-12));
    }

    #[test]
    fn record_lines_round_trip(r in record()) {
        let line = r.to_line();
        let parsed = RunRecord::from_line(&line).unwrap();
        prop_assert_eq!(parsed.to_line(), line);
        prop_assert_eq!(parsed, r);
    }

    #[test]
    fn csv_export_round_trips_events(records in prop::collection::vec(record(), 1..8)) {
        let mut unique: BTreeMap<_, RunRecord> = BTreeMap::new();
        for r in records {
            unique.insert(r.key.clone(), r);
        }
        let mut out = Vec::new();
        let rows = export_ioh_csv(unique.values(), &mut out).unwrap();
        let imported = import_ioh_csv(out.as_slice()).unwrap();
        let events: usize = unique.values().map(|r| r.trajectory.events.len()).sum();
        prop_assert_eq!(rows as usize, events);
        let mut total = 0;
        for (key, evs) in &imported {
            prop_assert_eq!(evs, &unique[key].trajectory.events);
            total += evs.len();
        }
        prop_assert_eq!(total, events);
    }

    #[test]
    fn loss_and_top_k_agree(values in grid()) {
        let t = aocc_table(&values);
        let loss = loss_table(&t, 2).unwrap();
        let top1 = top_k_counts(&t, 2, 1).unwrap();
        let functions = values[0].len();
        prop_assert_eq!(top1.values().sum::<usize>(), functions);
        for (name, l) in &loss {
            prop_assert!(*l >= 0.0);
            // An algorithm with zero loss is best (or tied best) everywhere.
            if *l == 0.0 && top1[name] == 0 {
                let tied = loss.values().filter(|v| **v == 0.0).count();
                prop_assert!(tied >= 2);
            }
        }
        let all = top_k_counts(&t, 2, values.len()).unwrap();
        prop_assert!(all.values().all(|c| *c == functions));
    }

    #[test]
    fn portfolio_values_are_monotone(values in grid()) {
        let t = aocc_table(&values);
        let names: Vec<String> = (0..values.len()).map(|a| format!("alg{a}")).collect();
        for spec in [PortfolioValueSpec::aocc(2), PortfolioValueSpec::fixed_budget(2, 10)] {
            for i in 0..names.len() {
                let base: Vec<&str> = names[..i].iter().map(String::as_str).collect();
                let gain = marginal_contribution(&names[i], &base, &t, spec).unwrap();
                prop_assert!(gain >= 0.0);
            }
            let reversed: Vec<&str> = names.iter().rev().map(String::as_str).collect();
            prop_assert_eq!(
                portfolio_value(&names, &t, spec).unwrap(),
                portfolio_value(&reversed, &t, spec).unwrap()
            );
        }
    }

    #[test]
    fn instances_are_reproducible_and_optimum_has_zero_precision(
        fid in prop::sample::select(FunctionId::IMPLEMENTED.to_vec()),
        inst in 0u32..50,
        d in prop::sample::select(vec![2usize, 3, 5, 10, 20]),
    ) {
        let a = make_instance(fid, inst, d).unwrap();
        let b = make_instance(fid, inst, d).unwrap();
        prop_assert_eq!(a.metadata(), b.metadata());
        let xopt = a.metadata().x_opt.clone();
        let y = a.evaluate(&xopt).unwrap();
        prop_assert!(a.precision_of(y).value() < 1e-8);
    }
}
