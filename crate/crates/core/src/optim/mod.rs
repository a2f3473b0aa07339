//! Portfolio of optimization heuristics behind a single ask/tell interface.
//!
//! Algorithms never evaluate anything themselves: the driver in this module
//! asks for a batch of candidates, evaluates them through a
//! [`BudgetedProblem`] (which owns the evaluation counter and the improvement
//! log) and tells the algorithm the raw objective values. A batch that would
//! overrun the budget is truncated and never told back.
//!
//! Default hyperparameters are standard literature values. Every parameter
//! can be overridden by name; see [`AlgorithmSpec::with_overrides`].

mod abc;
mod boundary;
mod cmaes;
mod cuckoo;
mod de;
mod es;
mod firefly;
mod gwo;
mod pso;
mod random_search;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datastore::{Event, Trajectory};
use crate::suite::{Precision, ProblemInstance};

pub use boundary::BoundaryHandling;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),
    #[error("algorithm `{algorithm}` has no parameter `{param}`")]
    UnknownParameter { algorithm: String, param: String },
    #[error("parameter `{param}` of `{algorithm}` is invalid: {value}")]
    InvalidParameter {
        algorithm: String,
        param: String,
        value: f64,
    },
    #[error("algorithm proposed an invalid candidate: {0}")]
    InvalidCandidate(String),
    #[error("problem already used {0} evaluations")]
    ProblemNotFresh(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    RandomSearch,
    EvolutionStrategy,
    DifferentialEvolution,
    ParticleSwarm,
    CovarianceAdaptation,
    Metaphor,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::RandomSearch => "random-search",
            Family::EvolutionStrategy => "evolution-strategy",
            Family::DifferentialEvolution => "differential-evolution",
            Family::ParticleSwarm => "particle-swarm",
            Family::CovarianceAdaptation => "covariance-adaptation",
            Family::Metaphor => "metaphor",
        };
        f.write_str(s)
    }
}

/// Name, family, hyperparameters and boundary policy of one algorithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub name: String,
    pub family: Family,
    pub params: BTreeMap<String, f64>,
    pub boundary_handling: BoundaryHandling,
    pub baseline: bool,
}

impl AlgorithmSpec {
    pub fn new(
        name: &str,
        family: Family,
        boundary_handling: BoundaryHandling,
        baseline: bool,
        params: &[(&str, f64)],
    ) -> Self {
        AlgorithmSpec {
            name: name.to_string(),
            family,
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            boundary_handling,
            baseline,
        }
    }

    /// Value of a documented parameter.
    ///
    /// Panics if the key is not part of this spec; algorithm constructors only
    /// ask for keys they registered.
    pub fn param(&self, key: &str) -> f64 {
        match self.params.get(key) {
            Some(v) => *v,
            None => panic!("algorithm `{}` has no parameter `{key}`", self.name),
        }
    }

    /// Replaces documented defaults; unknown keys and non-finite values are rejected.
    pub fn with_overrides(mut self, overrides: &BTreeMap<String, f64>) -> Result<Self, OptimError> {
        for (key, &value) in overrides {
            let Some(slot) = self.params.get_mut(key) else {
                return Err(OptimError::UnknownParameter {
                    algorithm: self.name.clone(),
                    param: key.clone(),
                });
            };
            if !value.is_finite() {
                return Err(OptimError::InvalidParameter {
                    algorithm: self.name.clone(),
                    param: key.clone(),
                    value,
                });
            }
            *slot = value;
        }
        Ok(self)
    }

    fn positive_count(&self, key: &str, minimum: usize) -> usize {
        (self.param(key).round().max(0.0) as usize).max(minimum)
    }
}

/// What an algorithm is allowed to know about the problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProblemInfo {
    pub dimension: usize,
    pub lower: f64,
    pub upper: f64,
    pub budget: u64,
}

/// Ask/tell interface implemented by every algorithm.
pub trait Optimizer: Send {
    /// Next batch of candidates. An empty batch ends the run early.
    fn ask(&mut self, rng: &mut Rng) -> Vec<Vec<f64>>;

    /// Objective values of the complete batch returned by the previous `ask`,
    /// in the same order. Non-finite values arrive as `+inf`.
    fn tell(&mut self, fitness: &[f64], rng: &mut Rng);
}

/// Anything the driver can evaluate and score.
pub trait Objective {
    fn dimension(&self) -> usize;
    fn bounds(&self) -> (f64, f64);
    fn evaluate(&self, x: &[f64]) -> f64;
    fn precision(&self, value: f64) -> Precision;
}

impl Objective for ProblemInstance {
    fn dimension(&self) -> usize {
        ProblemInstance::dimension(self)
    }

    fn bounds(&self) -> (f64, f64) {
        ProblemInstance::bounds(self)
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        ProblemInstance::evaluate(self, x).unwrap_or(f64::NAN)
    }

    fn precision(&self, value: f64) -> Precision {
        self.precision_of(value)
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("evaluation budget exhausted")]
pub struct BudgetExhausted;

/// An objective under a strict evaluation budget with improvement logging.
pub struct BudgetedProblem<'a, O: Objective + ?Sized> {
    objective: &'a O,
    budget: u64,
    evals_used: u64,
    best: Precision,
    log: Vec<Event>,
}

impl<'a, O: Objective + ?Sized> BudgetedProblem<'a, O> {
    pub fn new(objective: &'a O, budget: u64) -> Self {
        BudgetedProblem {
            objective,
            budget,
            evals_used: 0,
            best: Precision::new(f64::INFINITY),
            log: Vec::new(),
        }
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn evals_used(&self) -> u64 {
        self.evals_used
    }

    pub fn best_precision(&self) -> Precision {
        self.best
    }

    pub fn is_exhausted(&self) -> bool {
        self.evals_used >= self.budget
    }

    pub fn info(&self) -> ProblemInfo {
        let (lower, upper) = self.objective.bounds();
        ProblemInfo {
            dimension: self.objective.dimension(),
            lower,
            upper,
            budget: self.budget,
        }
    }

    /// Evaluates `x`, counting it against the budget. NaN and infinite
    /// objective values are returned as `+inf` and never improve the log.
    pub fn evaluate(&mut self, x: &[f64]) -> Result<f64, BudgetExhausted> {
        if self.is_exhausted() {
            return Err(BudgetExhausted);
        }
        self.evals_used += 1;
        let raw = self.objective.evaluate(x);
        let (value, precision) = if raw.is_finite() {
            (raw, self.objective.precision(raw))
        } else {
            (f64::INFINITY, Precision::new(f64::INFINITY))
        };
        if self.evals_used == 1 || precision < self.best {
            self.best = precision;
            self.log.push(Event {
                eval: self.evals_used,
                precision: precision.value(),
            });
        }
        Ok(value)
    }

    pub fn trajectory(&self) -> Trajectory {
        Trajectory {
            budget: self.budget,
            events: self.log.clone(),
        }
    }
}

pub type OptimizerFactory =
    Arc<dyn Fn(&AlgorithmSpec, &ProblemInfo) -> Box<dyn Optimizer> + Send + Sync>;

#[derive(Clone)]
struct Entry {
    spec: AlgorithmSpec,
    factory: OptimizerFactory,
}

/// Named algorithms with their default specs, in stable registration order.
#[derive(Clone)]
pub struct Registry {
    entries: Vec<Entry>,
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(self.entries.iter().map(|e| &e.spec.name))
            .finish()
    }
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Registry::empty();
        r.register(random_search::spec(), Arc::new(random_search::build));
        r.register(es::spec(), Arc::new(es::build));
        r.register(de::spec_a(), Arc::new(de::build));
        r.register(de::spec_b(), Arc::new(de::build));
        r.register(pso::spec(), Arc::new(pso::build));
        r.register(cmaes::spec(), Arc::new(cmaes::build));
        r.register(abc::spec(), Arc::new(abc::build));
        r.register(gwo::spec(), Arc::new(gwo::build));
        r.register(cuckoo::spec(), Arc::new(cuckoo::build));
        r.register(firefly::spec(), Arc::new(firefly::build));
        r
    }
}

impl Registry {
    pub fn empty() -> Self {
        Registry { entries: Vec::new() }
    }

    /// Adds or replaces the algorithm named `spec.name`.
    pub fn register(&mut self, spec: AlgorithmSpec, factory: OptimizerFactory) {
        let entry = Entry { spec, factory };
        match self.entries.iter_mut().find(|e| e.spec.name == entry.spec.name) {
            Some(slot) => *slot = entry,
            None => self.entries.push(entry),
        }
    }

    pub fn specs(&self) -> Vec<AlgorithmSpec> {
        self.entries.iter().map(|e| e.spec.clone()).collect()
    }

    pub fn get(&self, name: &str) -> Result<&AlgorithmSpec, OptimError> {
        self.entry(name).map(|e| &e.spec)
    }

    fn entry(&self, name: &str) -> Result<&Entry, OptimError> {
        self.entries
            .iter()
            .find(|e| e.spec.name == name)
            .ok_or_else(|| OptimError::UnknownAlgorithm(name.to_string()))
    }

    /// Runs `spec` on a fresh problem until the budget is spent or the
    /// algorithm stops asking.
    ///
    /// On `Err` the problem still holds the partial, well-formed log.
    pub fn run<O: Objective + ?Sized>(
        &self,
        spec: &AlgorithmSpec,
        problem: &mut BudgetedProblem<'_, O>,
        seed: u64,
    ) -> Result<Trajectory, OptimError> {
        let entry = self.entry(&spec.name)?;
        if problem.evals_used() != 0 {
            return Err(OptimError::ProblemNotFresh(problem.evals_used()));
        }
        let info = problem.info();
        let mut optimizer = (entry.factory)(spec, &info);
        let mut rng = Rng::seed_from_u64(seed);
        drive(optimizer.as_mut(), problem, &mut rng)?;
        Ok(problem.trajectory())
    }
}

fn drive<O: Objective + ?Sized>(
    optimizer: &mut dyn Optimizer,
    problem: &mut BudgetedProblem<'_, O>,
    rng: &mut Rng,
) -> Result<(), OptimError> {
    let dimension = problem.info().dimension;
    while !problem.is_exhausted() {
        let batch = optimizer.ask(rng);
        if batch.is_empty() {
            break;
        }
        let mut fitness = Vec::with_capacity(batch.len());
        for x in &batch {
            if x.len() != dimension {
                return Err(OptimError::InvalidCandidate(format!(
                    "expected {dimension} coordinates, got {}",
                    x.len()
                )));
            }
            if let Some(v) = x.iter().find(|v| !v.is_finite()) {
                return Err(OptimError::InvalidCandidate(format!("non-finite coordinate {v}")));
            }
            match problem.evaluate(x) {
                Ok(value) => fitness.push(value),
                // Partial final batch: never told back.
                Err(BudgetExhausted) => return Ok(()),
            }
        }
        optimizer.tell(&fitness, rng);
    }
    Ok(())
}

/// All registered algorithms with default parameters.
pub fn list_portfolio() -> Vec<AlgorithmSpec> {
    Registry::default().specs()
}

/// Runs a registered algorithm; see [`Registry::run`].
pub fn run_algorithm<O: Objective + ?Sized>(
    spec: &AlgorithmSpec,
    problem: &mut BudgetedProblem<'_, O>,
    seed: u64,
) -> Result<Trajectory, OptimError> {
    Registry::default().run(spec, problem, seed)
}

pub(crate) fn uniform_point(info: &ProblemInfo, rng: &mut Rng) -> Vec<f64> {
    use rand::Rng as _;
    (0..info.dimension)
        .map(|_| rng.random_range(info.lower..=info.upper))
        .collect()
}

/// Index of the smallest value; NaN never wins.
pub(crate) fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suite::{make_instance, FunctionId};
    use std::cell::RefCell;

    fn sphere(d: usize) -> ProblemInstance {
        make_instance(FunctionId(1), 0, d).unwrap()
    }

    #[test]
    fn budget_of_one_logs_one_event() {
        let inst = sphere(2);
        let mut p = BudgetedProblem::new(&inst, 1);
        let spec = Registry::default().get("random-search").unwrap().clone();
        let t = run_algorithm(&spec, &mut p, 7).unwrap();
        assert_eq!(t.events.len(), 1);
        assert_eq!(t.events[0].eval, 1);
        assert_eq!(p.evals_used(), 1);
    }

    #[test]
    fn evaluation_past_budget_is_rejected() {
        let inst = sphere(2);
        let mut p = BudgetedProblem::new(&inst, 2);
        p.evaluate(&[0.0, 0.0]).unwrap();
        p.evaluate(&[0.0, 0.0]).unwrap();
        assert_eq!(p.evaluate(&[0.0, 0.0]), Err(BudgetExhausted));
        assert_eq!(p.evals_used(), 2);
    }

    #[test]
    fn improvement_log_records_strict_decreases_only() {
        let inst = sphere(1);
        let x0 = inst.x_opt()[0];
        let mut p = BudgetedProblem::new(&inst, 10);
        for dx in [3.0, 4.0, 2.0, 2.0, 1.0, 0.0, 0.5] {
            p.evaluate(&[x0 + dx]).unwrap();
        }
        let evals: Vec<u64> = p.trajectory().events.iter().map(|e| e.eval).collect();
        assert_eq!(evals, vec![1, 3, 5, 6]);
        assert_eq!(p.best_precision().value(), 0.0);
    }

    struct NanObjective;

    impl Objective for NanObjective {
        fn dimension(&self) -> usize {
            1
        }
        fn bounds(&self) -> (f64, f64) {
            (-5.0, 5.0)
        }
        fn evaluate(&self, x: &[f64]) -> f64 {
            if x[0] < 0.0 {
                f64::NAN
            } else {
                x[0]
            }
        }
        fn precision(&self, value: f64) -> Precision {
            Precision::new(value)
        }
    }

    #[test]
    fn nan_values_count_but_never_improve() {
        let mut p = BudgetedProblem::new(&NanObjective, 5);
        assert_eq!(p.evaluate(&[-1.0]), Ok(f64::INFINITY));
        assert_eq!(p.evaluate(&[2.0]), Ok(2.0));
        assert_eq!(p.evaluate(&[-1.0]), Ok(f64::INFINITY));
        let t = p.trajectory();
        assert_eq!(t.events.len(), 2);
        assert_eq!(t.events[0].precision, f64::INFINITY);
        assert_eq!(p.evals_used(), 3);
    }

    #[test]
    fn portfolio_registry_contract() {
        let specs = list_portfolio();
        assert!(specs.len() >= 10);
        let rs = specs.iter().find(|s| s.name == "random-search").unwrap();
        assert!(rs.baseline);
        let a = specs.iter().find(|s| s.name == "de-a").unwrap();
        let b = specs.iter().find(|s| s.name == "de-b").unwrap();
        assert_eq!(a.family, Family::DifferentialEvolution);
        assert_eq!(b.family, Family::DifferentialEvolution);
        assert_ne!(a.boundary_handling, b.boundary_handling);
        assert_ne!(a.param("cr"), b.param("cr"));
        let mut names: Vec<_> = specs.iter().map(|s| s.name.clone()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), specs.len());
        let baselines: Vec<_> = specs.iter().filter(|s| s.baseline).map(|s| s.name.as_str()).collect();
        assert_eq!(
            baselines,
            vec!["random-search", "one-plus-one-es", "de-a", "pso", "sep-cma-es"]
        );
    }

    #[test]
    fn overrides_validate_keys() {
        let spec = Registry::default().get("de-a").unwrap().clone();
        let mut o = BTreeMap::new();
        o.insert("f".to_string(), 0.7);
        assert_eq!(spec.clone().with_overrides(&o).unwrap().param("f"), 0.7);
        o.insert("nope".to_string(), 1.0);
        assert!(matches!(
            spec.with_overrides(&o),
            Err(OptimError::UnknownParameter { .. })
        ));
    }

    #[test]
    fn unknown_algorithm() {
        let inst = sphere(2);
        let mut p = BudgetedProblem::new(&inst, 10);
        let mut spec = Registry::default().get("random-search").unwrap().clone();
        spec.name = "nope".into();
        assert_eq!(
            run_algorithm(&spec, &mut p, 1),
            Err(OptimError::UnknownAlgorithm("nope".into()))
        );
    }

    /// Records every evaluated point.
    struct Recording<'a> {
        inner: &'a ProblemInstance,
        seen: RefCell<Vec<Vec<f64>>>,
    }

    impl Objective for Recording<'_> {
        fn dimension(&self) -> usize {
            self.inner.dimension()
        }
        fn bounds(&self) -> (f64, f64) {
            self.inner.bounds()
        }
        fn evaluate(&self, x: &[f64]) -> f64 {
            self.seen.borrow_mut().push(x.to_vec());
            Objective::evaluate(self.inner, x)
        }
        fn precision(&self, value: f64) -> Precision {
            self.inner.precision_of(value)
        }
    }

    #[test]
    fn every_algorithm_respects_budget_bounds_and_determinism() {
        let registry = Registry::default();
        for fid in [1, 5, 20] {
            let inst = make_instance(FunctionId(fid), 1, 3).unwrap();
            for spec in registry.specs() {
                let rec = Recording {
                    inner: &inst,
                    seen: RefCell::new(Vec::new()),
                };
                let budget = 1237;
                let mut p = BudgetedProblem::new(&rec, budget);
                let t1 = registry.run(&spec, &mut p, 99).unwrap();
                assert!(p.evals_used() <= budget, "{}", spec.name);
                assert_eq!(p.evals_used(), budget, "{} stopped early", spec.name);
                for x in rec.seen.borrow().iter() {
                    assert!(
                        x.iter().all(|v| (-5.0..=5.0).contains(v)),
                        "{} evaluated {x:?}",
                        spec.name
                    );
                }
                assert_eq!(t1.events[0].eval, 1);
                for w in t1.events.windows(2) {
                    assert!(w[0].eval < w[1].eval);
                    assert!(w[0].precision > w[1].precision);
                }
                let mut p2 = BudgetedProblem::new(&inst, budget);
                let t2 = registry.run(&spec, &mut p2, 99).unwrap();
                assert_eq!(t1, t2, "{} not deterministic", spec.name);
            }
        }
    }

    #[test]
    fn seeds_change_first_sample() {
        let inst = sphere(3);
        for spec in Registry::default().specs() {
            let mut firsts = Vec::new();
            for seed in 0..100u64 {
                let rec = Recording {
                    inner: &inst,
                    seen: RefCell::new(Vec::new()),
                };
                let mut p = BudgetedProblem::new(&rec, 1);
                Registry::default().run(&spec, &mut p, seed).unwrap();
                firsts.push(rec.seen.into_inner().remove(0));
            }
            let mut collisions = 0;
            for i in 0..firsts.len() {
                for j in i + 1..firsts.len() {
                    if firsts[i] == firsts[j] {
                        collisions += 1;
                    }
                }
            }
            assert!(collisions <= 1, "{}: {collisions} collisions", spec.name);
        }
    }

    #[test]
    fn de_a_solves_sphere_5d() {
        let inst = sphere(5);
        let mut p = BudgetedProblem::new(&inst, 50_000);
        let spec = Registry::default().get("de-a").unwrap().clone();
        let t = run_algorithm(&spec, &mut p, 42).unwrap();
        let last = t.events.last().unwrap().precision;
        assert!(last <= 1e-8, "final precision {last}");
    }
}
