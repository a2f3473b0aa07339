//! Deterministic execution of the experiment grid.
//!
//! Every run draws its randomness from [`derive_seed`] alone, so the content
//! of a record never depends on scheduling, on the worker count, or on which
//! other runs are part of the grid. Workers pull jobs from a list sorted by
//! [`RunKey`]; a single writer appends finished records to the store.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datastore::{RecordStore, RunRecord, RunStatus, StoreError};
use crate::mix;
use crate::optim::{AlgorithmSpec, BudgetedProblem, Registry};
use crate::suite::{make_instance, FunctionId, MAX_DIMENSION};

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Identifies one run of an experiment. Ordered field by field.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RunKey {
    pub algorithm: String,
    pub function_id: FunctionId,
    pub dimension: usize,
    pub instance_id: u32,
    pub repetition: u32,
}

impl fmt::Display for RunKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/d{}/i{}/r{}",
            self.algorithm, self.function_id, self.dimension, self.instance_id, self.repetition
        )
    }
}

/// Seed of a single run: SplitMix64 folded over the FNV-1a hash of the
/// algorithm name, then function id, dimension, instance and repetition.
pub fn derive_seed(base_seed: u64, key: &RunKey) -> u64 {
    mix::mix_words(
        base_seed,
        &[
            mix::fnv1a(key.algorithm.as_bytes()),
            u64::from(key.function_id.0),
            key.dimension as u64,
            u64::from(key.instance_id),
            u64::from(key.repetition),
        ],
    )
}

/// Keys accepted in a TOML config file.
pub const CONFIG_KEYS: [&str; 9] = [
    "algorithms",
    "function_ids",
    "dimensions",
    "instance_ids",
    "repetitions",
    "budget_multiplier",
    "base_seed",
    "parallelism",
    "algo.<name>.<param>",
];

fn default_dimensions() -> Vec<usize> {
    vec![2, 5, 10, 20]
}

fn default_instances() -> Vec<u32> {
    (0..10).collect()
}

fn default_repetitions() -> u32 {
    5
}

fn default_multiplier() -> u64 {
    10_000
}

fn default_parallelism() -> usize {
    1
}

/// The experiment grid. Omitted keys take the full-scale defaults:
/// dimensions 2, 5, 10, 20; instances 0 to 9; 5 repetitions; budget
/// 10 000 evaluations per dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithms: Vec<String>,
    pub function_ids: Vec<FunctionId>,
    #[serde(default = "default_dimensions")]
    pub dimensions: Vec<usize>,
    #[serde(default = "default_instances")]
    pub instance_ids: Vec<u32>,
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
    #[serde(default = "default_multiplier")]
    pub budget_multiplier: u64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Hyperparameter overrides: `algo.<name>.<param> = value`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub algo: BTreeMap<String, BTreeMap<String, f64>>,
}

impl ExperimentConfig {
    /// The shipped small-scale grid: every registered algorithm, every
    /// implemented function, dimensions 2 and 5, 3 instances, 3 repetitions
    /// and 2 000 evaluations per dimension.
    pub fn desk_scale() -> Self {
        ExperimentConfig {
            algorithms: Registry::default().specs().into_iter().map(|s| s.name).collect(),
            function_ids: FunctionId::IMPLEMENTED.to_vec(),
            dimensions: vec![2, 5],
            instance_ids: vec![0, 1, 2],
            repetitions: 3,
            budget_multiplier: 2_000,
            base_seed: 2024,
            parallelism: 1,
            algo: BTreeMap::new(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, RunnerError> {
        toml::from_str(text).map_err(|e| RunnerError::ConfigInvalid(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RunnerError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunnerError::ConfigInvalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialization is infallible")
    }

    pub fn budget(&self, dimension: usize) -> u64 {
        self.budget_multiplier * dimension as u64
    }

    pub fn run_count(&self) -> usize {
        self.algorithms.len()
            * self.function_ids.len()
            * self.dimensions.len()
            * self.instance_ids.len()
            * self.repetitions as usize
    }

    /// All run keys in scheduling order.
    pub fn keys(&self) -> Vec<RunKey> {
        let mut keys = Vec::with_capacity(self.run_count());
        for algorithm in &self.algorithms {
            for &function_id in &self.function_ids {
                for &dimension in &self.dimensions {
                    for &instance_id in &self.instance_ids {
                        for repetition in 0..self.repetitions {
                            keys.push(RunKey {
                                algorithm: algorithm.clone(),
                                function_id,
                                dimension,
                                instance_id,
                                repetition,
                            });
                        }
                    }
                }
            }
        }
        keys.sort();
        keys
    }

    /// Checks the grid against `registry` and returns the resolved specs.
    pub fn validate(&self, registry: &Registry) -> Result<BTreeMap<String, AlgorithmSpec>, RunnerError> {
        let invalid = |msg: String| Err(RunnerError::ConfigInvalid(msg));
        for (field, empty) in [
            ("algorithms", self.algorithms.is_empty()),
            ("function_ids", self.function_ids.is_empty()),
            ("dimensions", self.dimensions.is_empty()),
            ("instance_ids", self.instance_ids.is_empty()),
        ] {
            if empty {
                return invalid(format!("`{field}` must not be empty"));
            }
        }
        if self.repetitions == 0 {
            return invalid("`repetitions` must be at least 1".into());
        }
        if self.budget_multiplier == 0 {
            return invalid("`budget_multiplier` must be at least 1".into());
        }
        if self.parallelism == 0 {
            return invalid("`parallelism` must be at least 1".into());
        }
        if let Some(dup) = first_duplicate(&self.algorithms) {
            return invalid(format!("algorithm `{dup}` listed twice"));
        }
        if let Some(dup) = first_duplicate(&self.function_ids) {
            return invalid(format!("function {dup} listed twice"));
        }
        if let Some(dup) = first_duplicate(&self.dimensions) {
            return invalid(format!("dimension {dup} listed twice"));
        }
        if let Some(dup) = first_duplicate(&self.instance_ids) {
            return invalid(format!("instance {dup} listed twice"));
        }
        for f in &self.function_ids {
            if !f.is_implemented() {
                return invalid(format!("unknown function id {}", f.0));
            }
        }
        for &d in &self.dimensions {
            if d == 0 || d > MAX_DIMENSION {
                return invalid(format!("dimension {d} outside 1..={MAX_DIMENSION}"));
            }
        }
        for name in self.algo.keys() {
            if !self.algorithms.contains(name) {
                return invalid(format!("overrides given for `{name}`, which is not in `algorithms`"));
            }
        }
        let mut specs = BTreeMap::new();
        for name in &self.algorithms {
            let spec = registry
                .get(name)
                .map_err(|_| RunnerError::ConfigInvalid(format!("unknown algorithm `{name}`")))?
                .clone();
            let spec = match self.algo.get(name) {
                Some(overrides) => spec
                    .with_overrides(overrides)
                    .map_err(|e| RunnerError::ConfigInvalid(e.to_string()))?,
                None => spec,
            };
            specs.insert(name.clone(), spec);
        }
        let mut seeds = HashSet::with_capacity(self.run_count());
        for key in self.keys() {
            if !seeds.insert(derive_seed(self.base_seed, &key)) {
                return invalid(format!("seed collision at {key}; choose another base_seed"));
            }
        }
        Ok(specs)
    }
}

fn first_duplicate<T: Eq + std::hash::Hash + Clone + fmt::Display>(items: &[T]) -> Option<String> {
    let mut seen = HashSet::new();
    items.iter().find(|i| !seen.insert((*i).clone())).map(|i| i.to_string())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunFailure {
    pub key: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub total_runs: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub failures: Vec<RunFailure>,
    pub store: PathBuf,
}

impl ExperimentSummary {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serialization is infallible")
    }
}

/// Executes one run in isolation. Panics and invalid candidates become a
/// failed record holding the trajectory logged so far.
pub fn execute_run(
    registry: &Registry,
    spec: &AlgorithmSpec,
    key: &RunKey,
    budget: u64,
    base_seed: u64,
) -> (RunRecord, Option<String>) {
    let seed = derive_seed(base_seed, key);
    let started = Instant::now();
    let instance = match make_instance(key.function_id, key.instance_id, key.dimension) {
        Ok(i) => i,
        Err(e) => {
            let record = RunRecord {
                key: key.clone(),
                seed,
                trajectory: crate::datastore::Trajectory {
                    budget,
                    events: Vec::new(),
                },
                status: RunStatus::Failed,
                wall_time: 0.0,
            };
            return (record, Some(e.to_string()));
        }
    };
    let mut problem = BudgetedProblem::new(&instance, budget);
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| registry.run(spec, &mut problem, seed)));
    let failure = match outcome {
        Ok(Ok(_)) => None,
        Ok(Err(e)) => Some(e.to_string()),
        Err(payload) => Some(panic_message(payload.as_ref())),
    };
    let record = RunRecord {
        key: key.clone(),
        seed,
        trajectory: problem.trajectory(),
        status: if failure.is_some() { RunStatus::Failed } else { RunStatus::Ok },
        wall_time: started.elapsed().as_secs_f64(),
    };
    (record, failure)
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        format!("panic: {s}")
    } else if let Some(s) = payload.downcast_ref::<String>() {
        format!("panic: {s}")
    } else {
        "panic".to_string()
    }
}

/// Runs the grid with the default algorithm registry.
pub fn run_experiment(
    config: &ExperimentConfig,
    store_path: impl AsRef<Path>,
) -> Result<ExperimentSummary, RunnerError> {
    run_experiment_with(config, &Registry::default(), store_path)
}

pub fn run_experiment_with(
    config: &ExperimentConfig,
    registry: &Registry,
    store_path: impl AsRef<Path>,
) -> Result<ExperimentSummary, RunnerError> {
    let specs = config.validate(registry)?;
    let mut store = RecordStore::open(store_path.as_ref())?;
    let jobs = config.keys();
    if let Some(existing) = jobs.iter().find(|k| store.contains(k)) {
        return Err(StoreError::DuplicateKey(existing.clone()).into());
    }

    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let workers = config.parallelism.min(jobs.len()).max(1);
    let (tx, rx) = mpsc::channel::<(RunRecord, Option<String>)>();
    let mut failures: BTreeMap<RunKey, String> = BTreeMap::new();
    let mut written = 0usize;
    let mut store_error = None;

    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (jobs, specs, next, stop) = (&jobs, &specs, &next, &stop);
            scope.spawn(move || loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(key) = jobs.get(i) else { break };
                let spec = &specs[&key.algorithm];
                let result = execute_run(registry, spec, key, config.budget(key.dimension), config.base_seed);
                if tx.send(result).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (record, failure) in rx {
            if let Err(e) = store.append(&record) {
                store_error = Some(e);
                stop.store(true, Ordering::Relaxed);
                break;
            }
            written += 1;
            if let Some(reason) = failure {
                failures.insert(record.key, reason);
            }
        }
    });
    if let Some(e) = store_error {
        return Err(e.into());
    }
    store.sync()?;

    let failures: Vec<RunFailure> = failures
        .into_iter()
        .map(|(k, reason)| RunFailure { key: k.to_string(), reason })
        .collect();
    Ok(ExperimentSummary {
        total_runs: written,
        succeeded: written - failures.len(),
        failed: failures.len(),
        failures,
        store: store.path().to_path_buf(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(rep: u32) -> RunKey {
        RunKey {
            algorithm: "de-a".into(),
            function_id: FunctionId(1),
            dimension: 2,
            instance_id: 0,
            repetition: rep,
        }
    }

    #[test]
    fn seeds_are_stable_and_mixed() {
        assert_eq!(derive_seed(1, &key(0)), derive_seed(1, &key(0)));
        assert_ne!(derive_seed(1, &key(0)), derive_seed(1, &key(1)));
        let config = ExperimentConfig::desk_scale();
        for k in config.keys() {
            assert_ne!(derive_seed(1, &k), derive_seed(2, &k));
        }
    }

    #[test]
    fn desk_scale_shape() {
        let c = ExperimentConfig::desk_scale();
        assert_eq!(c.algorithms.len(), 10);
        assert_eq!(c.function_ids.len(), 12);
        assert_eq!(c.run_count(), 10 * 12 * 2 * 3 * 3);
        assert!(c.validate(&Registry::default()).is_ok());
    }

    #[test]
    fn toml_defaults_follow_full_scale() {
        let c = ExperimentConfig::from_toml_str("algorithms = [\"pso\"]\nfunction_ids = [1]\n").unwrap();
        assert_eq!(c.dimensions, vec![2, 5, 10, 20]);
        assert_eq!(c.instance_ids, (0..10).collect::<Vec<_>>());
        assert_eq!(c.repetitions, 5);
        assert_eq!(c.budget(20), 200_000);
    }

    #[test]
    fn toml_round_trip_and_overrides() {
        let text = r#"
algorithms = ["de-a", "pso"]
function_ids = [1, 3]
dimensions = [2]
instance_ids = [0, 1]
repetitions = 2
budget_multiplier = 100
base_seed = 9
parallelism = 2

[algo.de-a]
f = 0.6
"#;
        let c = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(c.algo["de-a"]["f"], 0.6);
        assert_eq!(ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
        let specs = c.validate(&Registry::default()).unwrap();
        assert_eq!(specs["de-a"].param("f"), 0.6);
    }

    #[test]
    fn invalid_configs() {
        let base = ExperimentConfig::desk_scale();
        let check = |mutate: &dyn Fn(&mut ExperimentConfig), needle: &str| {
            let mut c = base.clone();
            mutate(&mut c);
            match c.validate(&Registry::default()) {
                Err(RunnerError::ConfigInvalid(msg)) => assert!(msg.contains(needle), "{msg}"),
                other => panic!("expected invalid config, got {other:?}"),
            }
        };
        check(&|c| c.algorithms.push("nope".into()), "nope");
        check(&|c| c.algorithms.clear(), "algorithms");
        check(&|c| c.repetitions = 0, "repetitions");
        check(&|c| c.budget_multiplier = 0, "budget_multiplier");
        check(&|c| c.function_ids.push(FunctionId(4)), "4");
        check(&|c| c.dimensions.push(0), "dimension 0");
        check(&|c| c.parallelism = 0, "parallelism");
        check(&|c| c.dimensions.push(2), "twice");
        check(
            &|c| {
                c.algo.insert("pso".into(), [("bogus".to_string(), 1.0)].into());
            },
            "bogus",
        );
        assert!(ExperimentConfig::from_toml_str("algorithms = [\"pso\"]\nfunction_ids=[1]\nwat = 3\n").is_err());
    }
}
