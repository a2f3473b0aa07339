//! Per-run and aggregated performance measures.
//!
//! The anytime measure is the normalized area over the convergence curve
//! (AOCC): the mean over all `B` evaluations of
//! `1 - (log10 clamp(y_i, lb, ub) - log10 lb) / (log10 ub - log10 lb)`,
//! where `y_i` is the best-so-far precision after evaluation `i`. It is
//! computed from the improvement events only, one term per step.
//!
//! Per-run AOCC is averaged arithmetically; precisions are aggregated with
//! the geometric mean after flooring at `1e-8` unless the arithmetic mode is
//! requested.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datastore::{RunRecord, RunStatus, Trajectory, TrajectoryError};
use crate::suite::{FunctionId, SOLVED_PRECISION};

/// Name of the reference algorithm for the dominance check.
pub const RANDOM_SEARCH: &str = "random-search";

/// Fixed-budget checkpoints, in evaluations per dimension.
pub const BUDGET_FACTORS: [u64; 7] = [10, 50, 100, 500, 1_000, 5_000, 10_000];

/// Relative tolerance under which two aggregated precisions count as equal.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("malformed trajectory: {0}")]
    MalformedTrajectory(#[from] TrajectoryError),
    #[error("invalid AOCC bounds lb={lb}, ub={ub}")]
    InvalidBounds { lb: f64, ub: f64 },
    #[error("empty input")]
    EmptyInput,
    #[error("non-positive value {0}")]
    NonPositiveValue(f64),
    #[error("budget {budget} outside 1..={max}")]
    BudgetOutOfRange { budget: u64, max: u64 },
    #[error("missing data for: {}", .0.join(", "))]
    MissingData(Vec<String>),
    #[error("baseline `{0}` is not in the table")]
    MissingBaseline(String),
}

/// Precision bounds of the AOCC, log10-scaled between them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AoccBounds {
    pub lb: f64,
    pub ub: f64,
}

impl Default for AoccBounds {
    fn default() -> Self {
        AoccBounds { lb: 1e-8, ub: 1e2 }
    }
}

impl AoccBounds {
    /// Relaxed upper bound (`AOCClarge`).
    pub fn large() -> Self {
        AoccBounds { lb: 1e-8, ub: 1e8 }
    }

    pub fn new(lb: f64, ub: f64) -> Result<Self, MetricsError> {
        if lb > 0.0 && ub > lb && ub.is_finite() {
            Ok(AoccBounds { lb, ub })
        } else {
            Err(MetricsError::InvalidBounds { lb, ub })
        }
    }

    /// Contribution of a single evaluation with best-so-far precision `y`.
    pub fn term(&self, y: f64) -> f64 {
        let (log_lb, log_ub) = (self.lb.log10(), self.ub.log10());
        let clamped = y.max(self.lb).min(self.ub);
        1.0 - (clamped.log10() - log_lb) / (log_ub - log_lb)
    }
}

pub fn aocc(trajectory: &Trajectory, bounds: AoccBounds) -> Result<f64, MetricsError> {
    trajectory.validate()?;
    let budget = trajectory.budget;
    let events = &trajectory.events;
    let mut area = 0.0;
    for (i, e) in events.iter().enumerate() {
        let until = events.get(i + 1).map_or(budget + 1, |next| next.eval);
        area += (until - e.eval) as f64 * bounds.term(e.precision);
    }
    Ok(area / budget as f64)
}

pub fn geometric_mean(values: &[f64]) -> Result<f64, MetricsError> {
    let first = *values.first().ok_or(MetricsError::EmptyInput)?;
    if let Some(&bad) = values.iter().find(|v| v.is_nan() || **v <= 0.0) {
        return Err(MetricsError::NonPositiveValue(bad));
    }
    if values.iter().all(|&v| v == first) {
        return Ok(first);
    }
    let mean_log = values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64;
    Ok(mean_log.exp())
}

pub fn arithmetic_mean(values: &[f64]) -> Result<f64, MetricsError> {
    let first = *values.first().ok_or(MetricsError::EmptyInput)?;
    if values.iter().all(|&v| v == first) {
        return Ok(first);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Best-so-far precision after `budget` evaluations, floored at `1e-8`.
pub fn precision_at_budget(trajectory: &Trajectory, budget: u64) -> Result<f64, MetricsError> {
    trajectory.validate()?;
    if budget == 0 || budget > trajectory.budget {
        return Err(MetricsError::BudgetOutOfRange {
            budget,
            max: trajectory.budget,
        });
    }
    let p = trajectory
        .best_precision_at(budget)
        .expect("validated trajectories start at evaluation 1");
    Ok(p.max(SOLVED_PRECISION))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Geometric,
    Arithmetic,
}

impl Aggregation {
    pub fn apply(self, values: &[f64]) -> Result<f64, MetricsError> {
        match self {
            Aggregation::Geometric => geometric_mean(values),
            Aggregation::Arithmetic => arithmetic_mean(values),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub algorithm: String,
    pub function_id: FunctionId,
    pub dimension: usize,
}

impl CellKey {
    pub fn new(algorithm: &str, function_id: FunctionId, dimension: usize) -> Self {
        CellKey {
            algorithm: algorithm.to_string(),
            function_id,
            dimension,
        }
    }

    pub fn label(&self) -> String {
        format!("{}/{}/d{}", self.algorithm, self.function_id, self.dimension)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub mean_aocc: f64,
    /// Aggregated precision keyed by budget factor.
    pub precision_at: BTreeMap<u64, f64>,
    pub run_count: usize,
}

/// Row labels, column labels and `[algorithm][function]` mean AOCC values.
pub type AoccMatrix = (Vec<String>, Vec<FunctionId>, Vec<Vec<f64>>);

/// Aggregated statistics per (algorithm, function, dimension).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PerformanceTable {
    cells: BTreeMap<CellKey, CellStats>,
}

impl PerformanceTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Aggregates successful runs; failed runs are ignored. A budget factor
    /// is included for a cell only if every run's budget covers it.
    pub fn from_records<'a>(
        records: impl IntoIterator<Item = &'a RunRecord>,
        bounds: AoccBounds,
        aggregation: Aggregation,
    ) -> Result<Self, MetricsError> {
        let mut grouped: BTreeMap<CellKey, Vec<&Trajectory>> = BTreeMap::new();
        for r in records {
            if r.status != RunStatus::Ok {
                continue;
            }
            let key = CellKey::new(&r.key.algorithm, r.key.function_id, r.key.dimension);
            grouped.entry(key).or_default().push(&r.trajectory);
        }
        let mut table = PerformanceTable::new();
        for (key, runs) in grouped {
            let aoccs = runs
                .iter()
                .map(|t| aocc(t, bounds))
                .collect::<Result<Vec<_>, _>>()?;
            let min_budget = runs.iter().map(|t| t.budget).min().unwrap_or(0);
            let mut precision_at = BTreeMap::new();
            for factor in BUDGET_FACTORS {
                let budget = factor * key.dimension as u64;
                if budget > min_budget {
                    continue;
                }
                let values = runs
                    .iter()
                    .map(|t| precision_at_budget(t, budget))
                    .collect::<Result<Vec<_>, _>>()?;
                precision_at.insert(factor, aggregation.apply(&values)?);
            }
            let stats = CellStats {
                mean_aocc: aoccs.iter().sum::<f64>() / aoccs.len() as f64,
                precision_at,
                run_count: runs.len(),
            };
            table.cells.insert(key, stats);
        }
        Ok(table)
    }

    pub fn insert(&mut self, key: CellKey, stats: CellStats) {
        self.cells.insert(key, stats);
    }

    pub fn get(&self, algorithm: &str, function_id: FunctionId, dimension: usize) -> Option<&CellStats> {
        self.cells.get(&CellKey::new(algorithm, function_id, dimension))
    }

    pub fn cells(&self) -> impl Iterator<Item = (&CellKey, &CellStats)> {
        self.cells.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn dimensions(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.cells.keys().map(|k| k.dimension).collect();
        set.into_iter().collect()
    }

    pub fn algorithms(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.cells.keys().map(|k| &k.algorithm).collect();
        set.into_iter().cloned().collect()
    }

    pub fn algorithms_in(&self, dimension: usize) -> Vec<String> {
        let set: BTreeSet<&String> = self
            .cells
            .keys()
            .filter(|k| k.dimension == dimension)
            .map(|k| &k.algorithm)
            .collect();
        set.into_iter().cloned().collect()
    }

    pub fn functions_in(&self, dimension: usize) -> Vec<FunctionId> {
        let set: BTreeSet<FunctionId> = self
            .cells
            .keys()
            .filter(|k| k.dimension == dimension)
            .map(|k| k.function_id)
            .collect();
        set.into_iter().collect()
    }

    pub fn functions(&self) -> Vec<FunctionId> {
        let set: BTreeSet<FunctionId> = self.cells.keys().map(|k| k.function_id).collect();
        set.into_iter().collect()
    }

    /// Cells of the full algorithms x functions grid of `dimension` that
    /// have no statistics.
    pub fn missing_cells(&self, dimension: usize) -> Vec<String> {
        let mut missing = Vec::new();
        for a in self.algorithms() {
            for f in self.functions_in(dimension) {
                if self.get(&a, f, dimension).is_none() {
                    missing.push(CellKey::new(&a, f, dimension).label());
                }
            }
        }
        missing
    }

    /// Mean AOCC matrix `[algorithm][function]` over the complete grid of
    /// `dimension`, with sorted row and column labels.
    pub fn aocc_matrix(
        &self,
        dimension: usize,
    ) -> Result<AoccMatrix, MetricsError> {
        let algorithms = self.algorithms_in(dimension);
        let functions = self.functions_in(dimension);
        if algorithms.is_empty() {
            return Err(MetricsError::MissingData(vec![format!("dimension {dimension}")]));
        }
        let missing = self.missing_cells(dimension);
        if !missing.is_empty() {
            return Err(MetricsError::MissingData(missing));
        }
        let rows = algorithms
            .iter()
            .map(|a| {
                functions
                    .iter()
                    .map(|&f| self.get(a, f, dimension).expect("checked above").mean_aocc)
                    .collect()
            })
            .collect();
        Ok((algorithms, functions, rows))
    }

    /// Aggregated precision at `budget_factor`, or the missing cell label.
    pub fn precision(
        &self,
        algorithm: &str,
        function_id: FunctionId,
        dimension: usize,
        budget_factor: u64,
    ) -> Result<f64, MetricsError> {
        self.get(algorithm, function_id, dimension)
            .and_then(|c| c.precision_at.get(&budget_factor).copied())
            .ok_or_else(|| {
                MetricsError::MissingData(vec![format!(
                    "{} at budget factor {budget_factor}",
                    CellKey::new(algorithm, function_id, dimension).label()
                )])
            })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum BudgetWinner {
    Winner(String),
    Tie(usize),
}

/// The algorithm with the lowest aggregated precision after
/// `budget_factor * dimension` evaluations, or the number of algorithms tied
/// for it.
pub fn best_at_budget(
    table: &PerformanceTable,
    function_id: FunctionId,
    dimension: usize,
    budget_factor: u64,
) -> Result<(BudgetWinner, f64), MetricsError> {
    let algorithms = table.algorithms_in(dimension);
    if algorithms.is_empty() {
        return Err(MetricsError::MissingData(vec![format!("dimension {dimension}")]));
    }
    let mut values = Vec::with_capacity(algorithms.len());
    let mut missing = Vec::new();
    for a in &algorithms {
        match table.precision(a, function_id, dimension, budget_factor) {
            Ok(v) => values.push(v),
            Err(MetricsError::MissingData(m)) => missing.extend(m),
            Err(e) => return Err(e),
        }
    }
    if !missing.is_empty() {
        return Err(MetricsError::MissingData(missing));
    }
    let best = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let tied: Vec<usize> = (0..values.len())
        .filter(|&i| values[i] <= best * (1.0 + TIE_TOLERANCE))
        .collect();
    let winner = if tied.len() >= 2 {
        BudgetWinner::Tie(tied.len())
    } else {
        BudgetWinner::Winner(algorithms[tied[0]].clone())
    };
    Ok((winner, best))
}

/// Mean over functions of the gap to the best mean AOCC on each function.
pub fn loss_table(table: &PerformanceTable, dimension: usize) -> Result<BTreeMap<String, f64>, MetricsError> {
    let (algorithms, functions, m) = table.aocc_matrix(dimension)?;
    let mut loss = vec![0.0; algorithms.len()];
    for f in 0..functions.len() {
        let best = m.iter().map(|row| row[f]).fold(f64::NEG_INFINITY, f64::max);
        for (a, row) in m.iter().enumerate() {
            loss[a] += best - row[f];
        }
    }
    Ok(algorithms
        .into_iter()
        .zip(loss)
        .map(|(a, l)| (a, l / functions.len() as f64))
        .collect())
}

/// Number of functions on which each algorithm ranks within the top `k` by
/// mean AOCC. Equal AOCC values are ranked by algorithm name.
pub fn top_k_counts(
    table: &PerformanceTable,
    dimension: usize,
    k: usize,
) -> Result<BTreeMap<String, usize>, MetricsError> {
    let (algorithms, functions, m) = table.aocc_matrix(dimension)?;
    let mut counts: BTreeMap<String, usize> = algorithms.iter().map(|a| (a.clone(), 0)).collect();
    for f in 0..functions.len() {
        let mut order: Vec<usize> = (0..algorithms.len()).collect();
        order.sort_by(|&a, &b| m[b][f].total_cmp(&m[a][f]).then_with(|| algorithms[a].cmp(&algorithms[b])));
        for &a in order.iter().take(k) {
            *counts.get_mut(&algorithms[a]).expect("known algorithm") += 1;
        }
    }
    Ok(counts)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Dominance {
    /// `true` where the algorithm is worse than random search on the function.
    pub worse: BTreeMap<(String, FunctionId), bool>,
    /// Number of flagged algorithms per function.
    pub per_function: BTreeMap<FunctionId, usize>,
}

/// Flags algorithms whose mean AOCC is at most 90% of random search's.
/// Nothing is flagged on functions where random search scores 0.
pub fn randomsearch_dominance(table: &PerformanceTable, dimension: usize) -> Result<Dominance, MetricsError> {
    let (algorithms, functions, m) = table.aocc_matrix(dimension)?;
    let rs = algorithms
        .iter()
        .position(|a| a == RANDOM_SEARCH)
        .ok_or_else(|| MetricsError::MissingBaseline(RANDOM_SEARCH.to_string()))?;
    let mut worse = BTreeMap::new();
    let mut per_function = BTreeMap::new();
    for (f, &fid) in functions.iter().enumerate() {
        let reference = m[rs][f];
        let mut count = 0;
        for (a, name) in algorithms.iter().enumerate() {
            let flagged = reference > 0.0 && m[a][f] <= 0.9 * reference;
            count += usize::from(flagged);
            worse.insert((name.clone(), fid), flagged);
        }
        per_function.insert(fid, count);
    }
    Ok(Dominance { worse, per_function })
}

/// Mean over functions of each algorithm's mean AOCC.
pub fn algorithm_mean_aocc(table: &PerformanceTable, dimension: usize) -> Result<BTreeMap<String, f64>, MetricsError> {
    let (algorithms, functions, m) = table.aocc_matrix(dimension)?;
    Ok(algorithms
        .into_iter()
        .zip(m)
        .map(|(a, row)| (a, row.iter().sum::<f64>() / functions.len() as f64))
        .collect())
}

/// Empirical distribution of per-algorithm mean AOCC.
#[derive(Clone, Debug, PartialEq)]
pub struct AoccDistribution {
    sorted: Vec<f64>,
}

impl AoccDistribution {
    pub fn from_means(means: impl IntoIterator<Item = f64>) -> Self {
        let mut sorted: Vec<f64> = means.into_iter().collect();
        sorted.sort_by(f64::total_cmp);
        AoccDistribution { sorted }
    }

    /// Fraction of algorithms with mean AOCC strictly below `x`.
    pub fn fraction_below(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.sorted.partition_point(|&v| v < x) as f64 / self.sorted.len() as f64
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }
}

pub fn aocc_distribution(table: &PerformanceTable, dimension: usize) -> Result<AoccDistribution, MetricsError> {
    Ok(AoccDistribution::from_means(algorithm_mean_aocc(table, dimension)?.into_values()))
}
