//! Portfolio-level analyses over a [`PerformanceTable`].
//!
//! Two portfolio value functions are supported:
//!
//! * fixed-budget, log-space: the sum over functions of the best (lowest)
//!   `log10(max(precision, 1e-8))` reached by a member at the chosen budget
//!   factor; lower is better. The empty portfolio scores `log10(1e2)` per
//!   function.
//! * AOCC: the mean over functions of the best (highest) member mean AOCC;
//!   higher is better. The empty portfolio scores 0.
//!
//! Marginal contributions are signed so that a positive value always means
//! the algorithm improves the portfolio.
//!
//! Approximate Shapley values draw `sets_per_size` subsets of every size
//! `1..=max_size` from the candidate pool. Each draw is seeded only by
//! `(sampling_seed, size, draw_index)` and the pool is sorted by name, so
//! every evaluated algorithm sees the same sets regardless of evaluation
//! order. The algorithm itself is removed from a drawn set that contains it.
//! Marginal contributions are averaged within each base-set size first and
//! the per-size means are then averaged, which weights sizes uniformly as in
//! the exact Shapley formula.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{CellKey, MetricsError, PerformanceTable};
use crate::mix;
use crate::suite::{FunctionId, SOLVED_PRECISION};

/// Per-function precision assumed for the empty portfolio.
pub const EMPTY_PORTFOLIO_PRECISION: f64 = 1e2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PortfolioError {
    #[error("portfolio is empty")]
    EmptySet,
    #[error(
        "candidate pool has {pool} algorithms but sets of up to {max_size} were requested; \
         lower max_size or add algorithms to the pool"
    )]
    PoolTooSmall { pool: usize, max_size: usize },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl From<PortfolioError> for MetricsError {
    fn from(e: PortfolioError) -> Self {
        match e {
            PortfolioError::Metrics(m) => m,
            other => MetricsError::MissingData(vec![other.to_string()]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum ValueMode {
    FixedBudgetLogspace { budget_factor: u64 },
    Aocc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortfolioValueSpec {
    pub mode: ValueMode,
    pub dimension: usize,
}

impl PortfolioValueSpec {
    pub fn fixed_budget(dimension: usize, budget_factor: u64) -> Self {
        PortfolioValueSpec {
            mode: ValueMode::FixedBudgetLogspace { budget_factor },
            dimension,
        }
    }

    pub fn aocc(dimension: usize) -> Self {
        PortfolioValueSpec {
            mode: ValueMode::Aocc,
            dimension,
        }
    }

    pub fn budget_factor(&self) -> Option<u64> {
        match self.mode {
            ValueMode::FixedBudgetLogspace { budget_factor } => Some(budget_factor),
            ValueMode::Aocc => None,
        }
    }
}

/// Per-function costs of a set of algorithms (lower is better in both
/// modes), so set values reduce to a per-function minimum.
#[derive(Clone, Debug)]
pub struct CostMatrix {
    spec: PortfolioValueSpec,
    names: Vec<String>,
    functions: Vec<FunctionId>,
    /// `costs[algorithm][function]`.
    costs: Vec<Vec<f64>>,
}

impl CostMatrix {
    /// Costs of `algorithms` on every function of the spec's dimension.
    pub fn build<S: AsRef<str>>(
        table: &PerformanceTable,
        algorithms: &[S],
        spec: PortfolioValueSpec,
    ) -> Result<Self, PortfolioError> {
        let functions = table.functions_in(spec.dimension);
        if functions.is_empty() {
            return Err(MetricsError::MissingData(vec![format!("dimension {}", spec.dimension)]).into());
        }
        let mut names = Vec::with_capacity(algorithms.len());
        let mut costs = Vec::with_capacity(algorithms.len());
        let mut missing = Vec::new();
        for a in algorithms {
            let a = a.as_ref();
            let mut row = Vec::with_capacity(functions.len());
            for &f in &functions {
                let cost = match spec.mode {
                    ValueMode::FixedBudgetLogspace { budget_factor } => table
                        .precision(a, f, spec.dimension, budget_factor)
                        .map(|p| p.max(SOLVED_PRECISION).log10()),
                    ValueMode::Aocc => table
                        .get(a, f, spec.dimension)
                        .map(|c| -c.mean_aocc)
                        .ok_or_else(|| MetricsError::MissingData(vec![CellKey::new(a, f, spec.dimension).label()])),
                };
                match cost {
                    Ok(c) => row.push(c),
                    Err(MetricsError::MissingData(m)) => missing.extend(m),
                    Err(e) => return Err(e.into()),
                }
            }
            names.push(a.to_string());
            costs.push(row);
        }
        if !missing.is_empty() {
            return Err(MetricsError::MissingData(missing).into());
        }
        Ok(CostMatrix {
            spec,
            names,
            functions,
            costs,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn functions(&self) -> &[FunctionId] {
        &self.functions
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn empty_cost(&self) -> f64 {
        match self.spec.mode {
            ValueMode::FixedBudgetLogspace { .. } => EMPTY_PORTFOLIO_PRECISION.log10(),
            ValueMode::Aocc => 0.0,
        }
    }

    /// Total cost of the set of row indices (lower is better).
    fn cost(&self, members: impl Iterator<Item = usize> + Clone) -> f64 {
        let n = self.functions.len();
        let total: f64 = (0..n)
            .map(|f| {
                members
                    .clone()
                    .map(|a| self.costs[a][f])
                    .fold(None, |acc: Option<f64>, c| Some(acc.map_or(c, |m| m.min(c))))
                    .unwrap_or_else(|| self.empty_cost())
            })
            .sum();
        match self.spec.mode {
            ValueMode::FixedBudgetLogspace { .. } => total,
            ValueMode::Aocc => total / n as f64,
        }
    }

    /// Portfolio value in the natural orientation of the mode.
    pub fn value(&self, members: &[usize]) -> f64 {
        let c = self.cost(members.iter().copied());
        match self.spec.mode {
            ValueMode::FixedBudgetLogspace { .. } => c,
            ValueMode::Aocc => -c,
        }
    }

    /// Improvement from adding `algorithm` to `base`; zero if already present.
    pub fn marginal(&self, algorithm: usize, base: &[usize]) -> f64 {
        if base.contains(&algorithm) {
            return 0.0;
        }
        let without = self.cost(base.iter().copied());
        let with = self.cost(base.iter().copied().chain(std::iter::once(algorithm)));
        without - with
    }
}

fn member_indices<S: AsRef<str>>(matrix: &CostMatrix, set: &[S]) -> Vec<usize> {
    set.iter()
        .map(|s| matrix.index(s.as_ref()).expect("matrix built from this set"))
        .collect()
}

pub fn portfolio_value<S: AsRef<str>>(
    algorithms: &[S],
    table: &PerformanceTable,
    spec: PortfolioValueSpec,
) -> Result<f64, PortfolioError> {
    if algorithms.is_empty() {
        return Err(PortfolioError::EmptySet);
    }
    let matrix = CostMatrix::build(table, algorithms, spec)?;
    Ok(matrix.value(&member_indices(&matrix, algorithms)))
}

/// Value of the empty portfolio under the documented convention.
pub fn empty_portfolio_value(table: &PerformanceTable, spec: PortfolioValueSpec) -> f64 {
    let functions = table.functions_in(spec.dimension).len() as f64;
    match spec.mode {
        ValueMode::FixedBudgetLogspace { .. } => functions * EMPTY_PORTFOLIO_PRECISION.log10(),
        ValueMode::Aocc => 0.0,
    }
}

pub fn marginal_contribution<S: AsRef<str>>(
    algorithm: &str,
    base_set: &[S],
    table: &PerformanceTable,
    spec: PortfolioValueSpec,
) -> Result<f64, PortfolioError> {
    let mut names: Vec<&str> = base_set.iter().map(|s| s.as_ref()).collect();
    if !names.contains(&algorithm) {
        names.push(algorithm);
    }
    let matrix = CostMatrix::build(table, &names, spec)?;
    let base: Vec<usize> = member_indices(&matrix, base_set);
    let a = matrix.index(algorithm).expect("added above");
    Ok(matrix.marginal(a, &base))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapleyOptions {
    pub sets_per_size: usize,
    pub max_size: usize,
    pub sampling_seed: u64,
}

impl Default for ShapleyOptions {
    fn default() -> Self {
        ShapleyOptions {
            sets_per_size: 250,
            max_size: 20,
            sampling_seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapleyEstimate {
    pub algorithm: String,
    pub value: f64,
    pub normalized_value: f64,
    pub sample_count: usize,
}

/// Subset of `0..pool` of the given size for one draw.
fn draw_set(pool: usize, size: usize, draw: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix::mix_words(seed, &[size as u64, draw as u64]));
    let mut set = rand::seq::index::sample(&mut rng, pool, size).into_vec();
    set.sort_unstable();
    set
}

fn sorted_pool<S: AsRef<str>>(pool: &[S]) -> Vec<String> {
    let mut names: Vec<String> = pool.iter().map(|s| s.as_ref().to_string()).collect();
    names.sort();
    names.dedup();
    names
}

fn estimate(matrix: &CostMatrix, algorithm: usize, pool: &[usize], options: &ShapleyOptions) -> f64 {
    // (sum, count) per base-set size.
    let mut strata: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for size in 1..=options.max_size {
        for draw in 0..options.sets_per_size {
            let base: Vec<usize> = draw_set(pool.len(), size, draw, options.sampling_seed)
                .into_iter()
                .map(|i| pool[i])
                .filter(|&a| a != algorithm)
                .collect();
            let slot = strata.entry(base.len()).or_insert((0.0, 0));
            slot.0 += matrix.marginal(algorithm, &base);
            slot.1 += 1;
        }
    }
    if strata.is_empty() {
        return 0.0;
    }
    strata.values().map(|(s, n)| s / *n as f64).sum::<f64>() / strata.len() as f64
}

fn check_pool(pool: usize, options: &ShapleyOptions) -> Result<(), PortfolioError> {
    if pool < options.max_size || pool == 0 {
        return Err(PortfolioError::PoolTooSmall {
            pool,
            max_size: options.max_size,
        });
    }
    Ok(())
}

/// Approximate Shapley value of one algorithm. `normalized_value` is left at
/// the raw value clamped to zero; see [`normalize`].
pub fn approximate_shapley<S: AsRef<str>>(
    algorithm: &str,
    candidate_pool: &[S],
    table: &PerformanceTable,
    spec: PortfolioValueSpec,
    options: ShapleyOptions,
) -> Result<ShapleyEstimate, PortfolioError> {
    let pool = sorted_pool(candidate_pool);
    check_pool(pool.len(), &options)?;
    let mut names = pool.clone();
    if !names.iter().any(|n| n == algorithm) {
        names.push(algorithm.to_string());
    }
    let matrix = CostMatrix::build(table, &names, spec)?;
    let pool_idx: Vec<usize> = (0..pool.len()).collect();
    let a = matrix.index(algorithm).expect("added above");
    let value = estimate(&matrix, a, &pool_idx, &options);
    Ok(ShapleyEstimate {
        algorithm: algorithm.to_string(),
        value,
        normalized_value: value.max(0.0),
        sample_count: options.sets_per_size * options.max_size,
    })
}

/// Approximate Shapley values of every pool member, normalized so the
/// column maximum is 1.
pub fn approximate_shapley_all<S: AsRef<str>>(
    candidate_pool: &[S],
    table: &PerformanceTable,
    spec: PortfolioValueSpec,
    options: ShapleyOptions,
) -> Result<Vec<ShapleyEstimate>, PortfolioError> {
    let pool = sorted_pool(candidate_pool);
    check_pool(pool.len(), &options)?;
    let matrix = CostMatrix::build(table, &pool, spec)?;
    let pool_idx: Vec<usize> = (0..pool.len()).collect();
    let mut estimates: Vec<ShapleyEstimate> = pool_idx
        .iter()
        .map(|&a| {
            let value = estimate(&matrix, a, &pool_idx, &options);
            ShapleyEstimate {
                algorithm: pool[a].clone(),
                value,
                normalized_value: 0.0,
                sample_count: options.sets_per_size * options.max_size,
            }
        })
        .collect();
    normalize(&mut estimates);
    Ok(estimates)
}

/// Clamps negative estimates to zero and scales so the largest is 1. A
/// column whose estimates are all non-positive normalizes to zeros.
pub fn normalize(estimates: &mut [ShapleyEstimate]) {
    let max = estimates.iter().map(|e| e.value.max(0.0)).fold(0.0, f64::max);
    for e in estimates.iter_mut() {
        e.normalized_value = if max > 0.0 { e.value.max(0.0) / max } else { 0.0 };
    }
}

/// Gain in AOCC-mode portfolio value from adding `algorithm` to the baselines.
pub fn baseline_contribution<S: AsRef<str>>(
    algorithm: &str,
    baselines: &[S],
    table: &PerformanceTable,
    dimension: usize,
) -> Result<f64, PortfolioError> {
    if baselines.is_empty() {
        return Err(PortfolioError::EmptySet);
    }
    let gain = marginal_contribution(algorithm, baselines, table, PortfolioValueSpec::aocc(dimension))?;
    Ok(gain.max(0.0))
}

/// Mean AOCC for every (dimension, function) pair, dimension-major.
pub fn performance_vector(
    algorithm: &str,
    table: &PerformanceTable,
    dimensions: &[usize],
    function_ids: &[FunctionId],
) -> Result<Vec<f64>, PortfolioError> {
    let mut v = Vec::with_capacity(dimensions.len() * function_ids.len());
    let mut missing = Vec::new();
    for &d in dimensions {
        for &f in function_ids {
            match table.get(algorithm, f, d) {
                Some(c) => v.push(c.mean_aocc),
                None => missing.push(CellKey::new(algorithm, f, d).label()),
            }
        }
    }
    if !missing.is_empty() {
        return Err(MetricsError::MissingData(missing).into());
    }
    Ok(v)
}

pub fn manhattan(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// L1 distance from the algorithm's performance vector (over every dimension
/// and function in the table) to the closest baseline; ties go to the
/// baseline that sorts first by name.
pub fn nearest_baseline_distance<S: AsRef<str>>(
    algorithm: &str,
    baselines: &[S],
    table: &PerformanceTable,
) -> Result<(f64, String), PortfolioError> {
    if baselines.is_empty() {
        return Err(PortfolioError::EmptySet);
    }
    let dims = table.dimensions();
    let funcs = table.functions();
    let own = performance_vector(algorithm, table, &dims, &funcs)?;
    let mut names: Vec<&str> = baselines.iter().map(|s| s.as_ref()).collect();
    names.sort();
    let mut best: Option<(f64, String)> = None;
    for b in names {
        let d = manhattan(&own, &performance_vector(b, table, &dims, &funcs)?);
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, b.to_string()));
        }
    }
    Ok(best.expect("baselines non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::CellStats;

    /// Precision table at budget factor 10 and dimension 2.
    fn table(rows: &[(&str, &[f64])]) -> PerformanceTable {
        let mut t = PerformanceTable::new();
        for (name, values) in rows {
            for (i, &p) in values.iter().enumerate() {
                t.insert(
                    CellKey::new(name, FunctionId(i as u32 + 1), 2),
                    CellStats {
                        mean_aocc: 1.0 - p.log10().clamp(-8.0, 2.0).abs() / 10.0,
                        precision_at: [(10, p)].into(),
                        run_count: 1,
                    },
                );
            }
        }
        t
    }

    fn fb() -> PortfolioValueSpec {
        PortfolioValueSpec::fixed_budget(2, 10)
    }

    #[test]
    fn two_function_example() {
        let t = table(&[("A", &[1e-8, 1e2]), ("B", &[1e2, 1e-8])]);
        assert_eq!(portfolio_value(&["A", "B"], &t, fb()).unwrap(), -16.0);
        assert_eq!(portfolio_value(&["A"], &t, fb()).unwrap(), -6.0);
        assert_eq!(marginal_contribution("B", &["A"], &t, fb()).unwrap(), 10.0);
        assert_eq!(marginal_contribution("A", &["A"], &t, fb()).unwrap(), 0.0);
    }

    #[test]
    fn empty_set_rejected() {
        let t = table(&[("A", &[1.0])]);
        assert_eq!(portfolio_value::<&str>(&[], &t, fb()), Err(PortfolioError::EmptySet));
        assert_eq!(empty_portfolio_value(&t, fb()), 2.0);
    }

    #[test]
    fn identical_member_contributes_nothing() {
        let t = table(&[("A", &[1e-3, 1.0]), ("A2", &[1e-3, 1.0]), ("C", &[1e-1, 1e-5])]);
        assert_eq!(marginal_contribution("A2", &["A"], &t, fb()).unwrap(), 0.0);
        assert!(marginal_contribution("C", &["A"], &t, fb()).unwrap() > 0.0);
    }

    #[test]
    fn missing_data_surfaces() {
        let t = table(&[("A", &[1.0])]);
        assert!(matches!(
            portfolio_value(&["A", "Z"], &t, fb()),
            Err(PortfolioError::Metrics(MetricsError::MissingData(_)))
        ));
        assert!(matches!(
            portfolio_value(&["A"], &t, PortfolioValueSpec::fixed_budget(2, 50)),
            Err(PortfolioError::Metrics(MetricsError::MissingData(_)))
        ));
    }

    #[test]
    fn pool_too_small() {
        let t = table(&[("A", &[1.0]), ("B", &[2.0])]);
        let opts = ShapleyOptions {
            max_size: 3,
            ..Default::default()
        };
        assert_eq!(
            approximate_shapley("A", &["A", "B"], &t, fb(), opts),
            Err(PortfolioError::PoolTooSmall { pool: 2, max_size: 3 })
        );
    }

    #[test]
    fn identical_pool_gives_equal_estimates() {
        let rows: Vec<(&str, &[f64])> = vec![
            ("a", &[1e-2, 1.0]),
            ("b", &[1e-2, 1.0]),
            ("c", &[1e-2, 1.0]),
            ("d", &[1e-2, 1.0]),
        ];
        let t = table(&rows);
        let opts = ShapleyOptions {
            sets_per_size: 50,
            max_size: 3,
            sampling_seed: 5,
        };
        let est = approximate_shapley_all(&["a", "b", "c", "d"], &t, fb(), opts).unwrap();
        assert!(est.iter().all(|e| e.value == est[0].value));
        assert!(est.iter().all(|e| e.normalized_value == 1.0));
    }

    #[test]
    fn dominated_algorithm_scores_zero() {
        let t = table(&[("a", &[1e-4, 1e-4]), ("b", &[1e-6, 1e-1]), ("dom", &[1e-3, 1e-2])]);
        // `dom` is beaten by `a` everywhere, but may still help the empty set;
        // only base sets containing `a` are guaranteed zero.
        assert_eq!(marginal_contribution("dom", &["a"], &t, fb()).unwrap(), 0.0);
        assert_eq!(marginal_contribution("dom", &["a", "b"], &t, fb()).unwrap(), 0.0);
    }

    #[test]
    fn normalization_clamps_and_scales() {
        let mut est: Vec<ShapleyEstimate> = [2.0, -1.0, 1.0]
            .iter()
            .enumerate()
            .map(|(i, &v)| ShapleyEstimate {
                algorithm: i.to_string(),
                value: v,
                normalized_value: 0.0,
                sample_count: 1,
            })
            .collect();
        normalize(&mut est);
        let n: Vec<f64> = est.iter().map(|e| e.normalized_value).collect();
        assert_eq!(n, vec![1.0, 0.0, 0.5]);
    }

    fn aocc_table(rows: &[(&str, &[f64])]) -> PerformanceTable {
        let mut t = PerformanceTable::new();
        for (name, values) in rows {
            for (i, &v) in values.iter().enumerate() {
                t.insert(
                    CellKey::new(name, FunctionId(i as u32 + 1), 2),
                    CellStats {
                        mean_aocc: v,
                        precision_at: BTreeMap::new(),
                        run_count: 1,
                    },
                );
            }
        }
        t
    }

    #[test]
    fn baseline_contribution_cases() {
        let t = aocc_table(&[
            ("b1", &[0.5, 0.5, 0.5, 0.5]),
            ("b2", &[0.25, 0.75, 0.5, 0.5]),
            ("x", &[0.75, 0.5, 0.5, 0.5]),
            ("dom", &[0.25, 0.25, 0.25, 0.25]),
        ]);
        let baselines = ["b1", "b2"];
        assert_eq!(baseline_contribution("b1", &baselines, &t, 2).unwrap(), 0.0);
        assert_eq!(baseline_contribution("x", &baselines, &t, 2).unwrap(), 0.25 / 4.0);
        assert_eq!(baseline_contribution("dom", &baselines, &t, 2).unwrap(), 0.0);
    }

    #[test]
    fn performance_vectors_and_distance() {
        let t = aocc_table(&[("a", &[0.5, 0.5]), ("b", &[0.25, 0.125]), ("c", &[0.75, 0.875])]);
        let v = performance_vector("a", &t, &[2], &[FunctionId(1), FunctionId(2)]).unwrap();
        assert_eq!(v, vec![0.5, 0.5]);
        let (d, nearest) = nearest_baseline_distance("a", &["b"], &t).unwrap();
        assert_eq!(d, 0.625);
        assert_eq!(nearest, "b");
        // Equidistant baselines: name order wins.
        let (_, nearest) = nearest_baseline_distance("a", &["c", "b"], &t).unwrap();
        assert_eq!(nearest, "b");
        let (d, nearest) = nearest_baseline_distance("b", &["a", "b"], &t).unwrap();
        assert_eq!((d, nearest.as_str()), (0.0, "b"));
        assert!(matches!(
            performance_vector("a", &t, &[2, 5], &[FunctionId(1)]),
            Err(PortfolioError::Metrics(MetricsError::MissingData(_)))
        ));
    }
}
