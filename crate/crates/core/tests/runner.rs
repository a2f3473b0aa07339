use std::collections::BTreeMap;
use std::sync::Arc;

use optbench_core::datastore::{load_records, LoadOptions, RunRecord, RunStatus, StoreError};
use optbench_core::optim::{AlgorithmSpec, BoundaryHandling, Family, Optimizer, Registry, Rng};
use optbench_core::runner::{run_experiment, run_experiment_with, ExperimentConfig, RunKey, RunnerError};
use optbench_core::suite::FunctionId;

fn small_config() -> ExperimentConfig {
    ExperimentConfig {
        algorithms: vec!["random-search".into(), "de-a".into()],
        function_ids: vec![FunctionId(1), FunctionId(8)],
        dimensions: vec![2],
        instance_ids: vec![0, 1],
        repetitions: 2,
        budget_multiplier: 100,
        base_seed: 9,
        parallelism: 1,
        algo: BTreeMap::new(),
    }
}

fn load(path: &std::path::Path) -> Vec<RunRecord> {
    load_records(path, |_| true, LoadOptions::default()).unwrap().records
}

fn by_key(records: Vec<RunRecord>) -> BTreeMap<RunKey, RunRecord> {
    records.into_iter().map(|r| (r.key.clone(), r)).collect()
}

#[test]
fn grid_produces_one_record_per_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.ndjson");
    let config = small_config();
    let summary = run_experiment(&config, &path).unwrap();
    assert_eq!((summary.total_runs, summary.failed), (16, 0));
    let records = load(&path);
    assert_eq!(records.len(), 16);
    let keys: Vec<RunKey> = records.iter().map(|r| r.key.clone()).collect();
    assert_eq!(keys, config.keys());
    for r in &records {
        assert_eq!(r.status, RunStatus::Ok);
        assert_eq!(r.trajectory.budget, 200);
        assert!(r.trajectory.events.last().unwrap().eval <= 200);
    }
}

#[test]
fn parallelism_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut stores = Vec::new();
    for p in [1, 3, 8] {
        let path = dir.path().join(format!("p{p}.ndjson"));
        let config = ExperimentConfig {
            parallelism: p,
            ..small_config()
        };
        run_experiment(&config, &path).unwrap();
        stores.push(load(&path));
    }
    for s in &stores[1..] {
        assert_eq!(s.len(), stores[0].len());
        for (a, b) in s.iter().zip(&stores[0]) {
            assert_eq!((&a.key, a.seed, &a.trajectory), (&b.key, b.seed, &b.trajectory));
        }
    }
}

#[test]
fn subset_runs_match_full_grid() {
    let dir = tempfile::tempdir().unwrap();
    let full_path = dir.path().join("full.ndjson");
    run_experiment(&small_config(), &full_path).unwrap();
    let full = by_key(load(&full_path));

    let partial_path = dir.path().join("partial.ndjson");
    let config = ExperimentConfig {
        algorithms: vec!["de-a".into()],
        function_ids: vec![FunctionId(8)],
        ..small_config()
    };
    run_experiment(&config, &partial_path).unwrap();
    for r in load(&partial_path) {
        assert_eq!(full[&r.key].trajectory, r.trajectory);
    }
}

#[test]
fn rerunning_into_same_store_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dup.ndjson");
    run_experiment(&small_config(), &path).unwrap();
    let err = run_experiment(&small_config(), &path).unwrap_err();
    assert!(matches!(err, RunnerError::Store(StoreError::DuplicateKey(_))));
    assert_eq!(load(&path).len(), 16);

    // A disjoint grid appends to the existing store.
    let extra = ExperimentConfig {
        instance_ids: vec![2],
        ..small_config()
    };
    run_experiment(&extra, &path).unwrap();
    assert_eq!(load(&path).len(), 24);
}

struct Poisoned;

impl Optimizer for Poisoned {
    fn ask(&mut self, _rng: &mut Rng) -> Vec<Vec<f64>> {
        vec![vec![0.0, 0.0]]
    }

    fn tell(&mut self, _fitness: &[f64], _rng: &mut Rng) {
        panic!("poisoned optimizer");
    }
}

#[test]
fn panicking_algorithm_fails_only_its_own_runs() {
    let mut registry = Registry::default();
    registry.register(
        AlgorithmSpec::new("poisoned", Family::Metaphor, BoundaryHandling::Clamp, false, &[]),
        Arc::new(|_spec, _info| Box::new(Poisoned) as Box<dyn Optimizer>),
    );
    let config = ExperimentConfig {
        algorithms: vec!["random-search".into(), "poisoned".into()],
        function_ids: vec![FunctionId(1)],
        instance_ids: vec![0],
        repetitions: 1,
        parallelism: 2,
        ..small_config()
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("poison.ndjson");
    let summary = run_experiment_with(&config, &registry, &path).unwrap();
    assert_eq!((summary.total_runs, summary.succeeded, summary.failed), (2, 1, 1));
    assert_eq!(summary.failures[0].key, "poisoned/F1/d2/i0/r0");
    assert!(summary.failures[0].reason.contains("poisoned optimizer"));

    let records = by_key(load(&path));
    let bad = records.values().find(|r| r.key.algorithm == "poisoned").unwrap();
    assert_eq!(bad.status, RunStatus::Failed);
    assert_eq!(bad.trajectory.events.len(), 1);

    let clean_path = dir.path().join("clean.ndjson");
    let clean = ExperimentConfig {
        algorithms: vec!["random-search".into()],
        ..config
    };
    run_experiment(&clean, &clean_path).unwrap();
    let reference = load(&clean_path).remove(0);
    assert_eq!(records[&reference.key].trajectory, reference.trajectory);
}

#[test]
fn invalid_configs_are_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("never.ndjson");
    let cases = [
        ExperimentConfig {
            algorithms: vec!["nope".into()],
            ..small_config()
        },
        ExperimentConfig {
            function_ids: vec![FunctionId(4)],
            ..small_config()
        },
        ExperimentConfig {
            dimensions: vec![0],
            ..small_config()
        },
        ExperimentConfig {
            repetitions: 0,
            ..small_config()
        },
    ];
    for config in cases {
        assert!(matches!(run_experiment(&config, &path), Err(RunnerError::ConfigInvalid(_))));
    }
    assert!(!path.exists());
}

#[test]
fn overrides_change_only_their_algorithm() {
    let dir = tempfile::tempdir().unwrap();
    let base_path = dir.path().join("base.ndjson");
    run_experiment(&small_config(), &base_path).unwrap();
    let base = by_key(load(&base_path));

    let tuned_path = dir.path().join("tuned.ndjson");
    let mut config = small_config();
    config
        .algo
        .insert("de-a".into(), [("f".to_string(), 0.9)].into_iter().collect());
    run_experiment(&config, &tuned_path).unwrap();
    let tuned = by_key(load(&tuned_path));
    let mut changed = 0;
    for (k, r) in &tuned {
        if k.algorithm == "random-search" {
            assert_eq!(r.trajectory, base[k].trajectory);
        } else if r.trajectory != base[k].trajectory {
            changed += 1;
        }
    }
    assert!(changed > 0);
}
