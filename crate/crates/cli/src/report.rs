//! Report builders. Every report is a pure function of the performance table
//! and the request.

use std::collections::BTreeSet;

use clap::ValueEnum;
use optbench_core::metrics::{
    aocc_distribution, algorithm_mean_aocc, best_at_budget, loss_table, randomsearch_dominance, top_k_counts,
    BudgetWinner, CellKey, MetricsError, PerformanceTable, BUDGET_FACTORS,
};
use optbench_core::portfolio::{
    approximate_shapley_all, baseline_contribution, nearest_baseline_distance, PortfolioError, PortfolioValueSpec,
    ShapleyOptions,
};
use optbench_core::suite::FunctionId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportKind {
    /// Mean AOCC and fixed-budget precision per (algorithm, function, dimension).
    AoccTable,
    /// Per-algorithm mean AOCC and its empirical CDF over algorithms.
    AoccCdf,
    /// Algorithms at or below 90% of random search's mean AOCC.
    RsDominance,
    /// Top-3 finishes, mean AOCC loss and contribution to the baselines.
    Top3LossContribution,
    /// Best algorithm (or tie) per function at each budget factor.
    BestAtBudget,
    /// Approximate Shapley values of fixed-budget portfolio contributions.
    Shapley,
    /// Baseline contribution and distance to the nearest baseline.
    Complementarity,
}

impl ReportKind {
    pub fn name(self) -> &'static str {
        match self {
            ReportKind::AoccTable => "aocc-table",
            ReportKind::AoccCdf => "aocc-cdf",
            ReportKind::RsDominance => "rs-dominance",
            ReportKind::Top3LossContribution => "top3-loss-contribution",
            ReportKind::BestAtBudget => "best-at-budget",
            ReportKind::Shapley => "shapley",
            ReportKind::Complementarity => "complementarity",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Text(String),
    Int(u64),
    Num(f64),
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Text(s) => f.write_str(s),
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Num(v) => write!(f, "{v}"),
        }
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

/// Values for an SVG heatmap; `None` cells are drawn in gray.
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub title: String,
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl Heatmap {
    fn new(title: String, rows: Vec<String>, columns: Vec<String>) -> Self {
        let values = vec![vec![None; columns.len()]; rows.len()];
        Heatmap {
            title,
            rows,
            columns,
            values,
        }
    }

    fn set(&mut self, row: &str, column: &str, value: f64) {
        let r = self.rows.iter().position(|x| x == row).expect("declared row");
        let c = self.columns.iter().position(|x| x == column).expect("declared column");
        self.values[r][c] = Some(value);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub heatmap: Heatmap,
}

const LONG_COLUMNS: [&str; 5] = ["algorithm", "function_id", "dimension", "metric", "value"];

#[derive(Clone, Debug)]
pub struct ReportOptions {
    pub baselines: Vec<String>,
    pub pool: Option<Vec<String>>,
    pub budget_factor: Option<u64>,
    pub shapley: ShapleyOptions,
}

#[derive(Debug)]
pub enum ReportError {
    Portfolio(PortfolioError),
    Metrics(MetricsError),
}

impl From<MetricsError> for ReportError {
    fn from(e: MetricsError) -> Self {
        ReportError::Metrics(e)
    }
}

impl From<PortfolioError> for ReportError {
    fn from(e: PortfolioError) -> Self {
        match e {
            PortfolioError::Metrics(m) => ReportError::Metrics(m),
            other => ReportError::Portfolio(other),
        }
    }
}

fn fid(f: FunctionId) -> Cell {
    Cell::Int(u64::from(f.0))
}

/// Every cell of every dimension must be present.
fn check_complete(table: &PerformanceTable) -> Result<Vec<usize>, MetricsError> {
    let dims = table.dimensions();
    if dims.is_empty() {
        return Err(MetricsError::MissingData(vec!["store has no successful runs".into()]));
    }
    let missing: Vec<String> = dims.iter().flat_map(|&d| table.missing_cells(d)).collect();
    if !missing.is_empty() {
        return Err(MetricsError::MissingData(missing));
    }
    Ok(dims)
}

/// Budget factors recorded for every cell of the dimension.
fn common_factors(table: &PerformanceTable, dimension: usize) -> Vec<u64> {
    BUDGET_FACTORS
        .into_iter()
        .filter(|f| {
            table
                .cells()
                .filter(|(k, _)| k.dimension == dimension)
                .all(|(_, c)| c.precision_at.contains_key(f))
        })
        .collect()
}

fn factors_for(table: &PerformanceTable, dimension: usize, requested: Option<u64>) -> Result<Vec<u64>, MetricsError> {
    let available = common_factors(table, dimension);
    match requested {
        Some(f) if available.contains(&f) => Ok(vec![f]),
        Some(f) => Err(MetricsError::MissingData(vec![format!("dimension {dimension} at budget factor {f}")])),
        None if available.is_empty() => Err(MetricsError::MissingData(vec![format!(
            "dimension {dimension}: no budget factor covered by every run"
        )])),
        None => Ok(available),
    }
}

fn column_label(f: FunctionId, d: usize) -> String {
    format!("{f} d{d}")
}

fn sub_table(table: &PerformanceTable, dimension: usize) -> PerformanceTable {
    let mut t = PerformanceTable::new();
    for (k, c) in table.cells().filter(|(k, _)| k.dimension == dimension) {
        t.insert(k.clone(), c.clone());
    }
    t
}

fn present_baselines(table: &PerformanceTable, requested: &[String]) -> Result<Vec<String>, MetricsError> {
    let known: BTreeSet<String> = table.algorithms().into_iter().collect();
    let missing: Vec<String> = requested.iter().filter(|b| !known.contains(*b)).cloned().collect();
    if let Some(first) = missing.first() {
        return Err(MetricsError::MissingBaseline(first.clone()));
    }
    if requested.is_empty() {
        return Err(MetricsError::MissingData(vec!["no baseline algorithms".into()]));
    }
    Ok(requested.to_vec())
}

fn aocc_table(table: &PerformanceTable) -> Result<Report, ReportError> {
    let dims = check_complete(table)?;
    let algorithms = table.algorithms();
    let columns = dims
        .iter()
        .flat_map(|&d| table.functions_in(d).into_iter().map(move |f| column_label(f, d)))
        .collect();
    let mut heatmap = Heatmap::new("mean AOCC".into(), algorithms.clone(), columns);
    let mut rows = Vec::new();
    for (key, cell) in table.cells() {
        let CellKey {
            algorithm,
            function_id,
            dimension,
        } = key;
        rows.push(vec![
            algorithm.as_str().into(),
            fid(*function_id),
            (*dimension).into(),
            "aocc".into(),
            cell.mean_aocc.into(),
        ]);
        for (factor, p) in &cell.precision_at {
            rows.push(vec![
                algorithm.as_str().into(),
                fid(*function_id),
                (*dimension).into(),
                format!("precision@{factor}").into(),
                (*p).into(),
            ]);
        }
        heatmap.set(algorithm, &column_label(*function_id, *dimension), cell.mean_aocc);
    }
    Ok(Report {
        name: ReportKind::AoccTable.name(),
        columns: LONG_COLUMNS.to_vec(),
        rows,
        heatmap,
    })
}

fn aocc_cdf(table: &PerformanceTable) -> Result<Report, ReportError> {
    let dims = check_complete(table)?;
    let algorithms = table.algorithms();
    let columns = dims.iter().map(|d| format!("d{d}")).collect();
    let mut heatmap = Heatmap::new("mean AOCC over functions".into(), algorithms, columns);
    let mut rows = Vec::new();
    for &d in &dims {
        let means = algorithm_mean_aocc(table, d)?;
        let cdf = aocc_distribution(table, d)?;
        for (a, m) in &means {
            rows.push(vec![a.as_str().into(), "all".into(), d.into(), "mean_aocc".into(), (*m).into()]);
            rows.push(vec![
                a.as_str().into(),
                "all".into(),
                d.into(),
                "fraction_below".into(),
                cdf.fraction_below(*m).into(),
            ]);
            heatmap.set(a, &format!("d{d}"), *m);
        }
    }
    Ok(Report {
        name: ReportKind::AoccCdf.name(),
        columns: LONG_COLUMNS.to_vec(),
        rows,
        heatmap,
    })
}

fn rs_dominance(table: &PerformanceTable) -> Result<Report, ReportError> {
    let dims = check_complete(table)?;
    let columns = dims
        .iter()
        .flat_map(|&d| table.functions_in(d).into_iter().map(move |f| column_label(f, d)))
        .collect();
    let mut heatmap = Heatmap::new("worse than random search (1 = flagged)".into(), table.algorithms(), columns);
    let mut rows = Vec::new();
    for &d in &dims {
        let dom = randomsearch_dominance(table, d)?;
        for ((a, f), flagged) in &dom.worse {
            let v = u64::from(*flagged);
            rows.push(vec![a.as_str().into(), fid(*f), d.into(), "worse_than_rs".into(), v.into()]);
            heatmap.set(a, &column_label(*f, d), v as f64);
        }
        for (f, n) in &dom.per_function {
            rows.push(vec!["*".into(), fid(*f), d.into(), "flagged_count".into(), (*n).into()]);
        }
    }
    Ok(Report {
        name: ReportKind::RsDominance.name(),
        columns: LONG_COLUMNS.to_vec(),
        rows,
        heatmap,
    })
}

fn top3_loss_contribution(table: &PerformanceTable, options: &ReportOptions) -> Result<Report, ReportError> {
    let dims = check_complete(table)?;
    let baselines = present_baselines(table, &options.baselines)?;
    let columns = dims.iter().map(|d| format!("d{d}")).collect();
    let mut heatmap = Heatmap::new("contribution to the baseline portfolio".into(), table.algorithms(), columns);
    let mut rows = Vec::new();
    for &d in &dims {
        let top3 = top_k_counts(table, d, 3)?;
        let loss = loss_table(table, d)?;
        for (a, count) in &top3 {
            let contribution = baseline_contribution(a, &baselines, table, d)?;
            rows.push(vec![a.as_str().into(), "all".into(), d.into(), "top3_count".into(), (*count).into()]);
            rows.push(vec![a.as_str().into(), "all".into(), d.into(), "mean_loss".into(), loss[a].into()]);
            rows.push(vec![
                a.as_str().into(),
                "all".into(),
                d.into(),
                "baseline_contribution".into(),
                contribution.into(),
            ]);
            heatmap.set(a, &format!("d{d}"), contribution);
        }
    }
    Ok(Report {
        name: ReportKind::Top3LossContribution.name(),
        columns: LONG_COLUMNS.to_vec(),
        rows,
        heatmap,
    })
}

fn best_at_budget_report(table: &PerformanceTable, options: &ReportOptions) -> Result<Report, ReportError> {
    let dims = check_complete(table)?;
    let mut plan = Vec::new();
    for &d in &dims {
        plan.push((d, factors_for(table, d, options.budget_factor)?));
    }
    let functions = table.functions();
    let columns: Vec<String> = plan
        .iter()
        .flat_map(|(d, fs)| fs.iter().map(move |f| format!("d{d} x{f}")))
        .collect();
    let mut heatmap = Heatmap::new(
        "log10 best precision".into(),
        functions.iter().map(|f| f.to_string()).collect(),
        columns,
    );
    let mut rows = Vec::new();
    for (d, factors) in &plan {
        for &f in &table.functions_in(*d) {
            for &factor in factors {
                let (winner, best) = best_at_budget(table, f, *d, factor)?;
                let (name, ties) = match winner {
                    BudgetWinner::Winner(a) => (a, 1),
                    BudgetWinner::Tie(n) => ("tie".to_string(), n),
                };
                rows.push(vec![fid(f), (*d).into(), factor.into(), name.into(), ties.into(), best.into()]);
                heatmap.set(&f.to_string(), &format!("d{d} x{factor}"), best.log10());
            }
        }
    }
    Ok(Report {
        name: ReportKind::BestAtBudget.name(),
        columns: vec!["function_id", "dimension", "budget_factor", "winner", "tie_count", "best_precision"],
        rows,
        heatmap,
    })
}

fn shapley(table: &PerformanceTable, options: &ReportOptions) -> Result<Report, ReportError> {
    let dims = check_complete(table)?;
    let mut plan = Vec::new();
    for &d in &dims {
        plan.push((d, factors_for(table, d, options.budget_factor)?));
    }
    let pool = options.pool.clone().unwrap_or_else(|| table.algorithms());
    let columns = plan
        .iter()
        .flat_map(|(d, fs)| fs.iter().map(move |f| format!("d{d} x{f}")))
        .collect();
    let mut rows_names = pool.clone();
    rows_names.sort();
    rows_names.dedup();
    let mut heatmap = Heatmap::new("normalized Shapley value".into(), rows_names, columns);
    let mut rows = Vec::new();
    for (d, factors) in &plan {
        for &factor in factors {
            let spec = PortfolioValueSpec::fixed_budget(*d, factor);
            for e in approximate_shapley_all(&pool, table, spec, options.shapley)? {
                rows.push(vec![
                    e.algorithm.as_str().into(),
                    (*d).into(),
                    factor.into(),
                    e.value.into(),
                    e.normalized_value.into(),
                    e.sample_count.into(),
                ]);
                heatmap.set(&e.algorithm, &format!("d{d} x{factor}"), e.normalized_value);
            }
        }
    }
    Ok(Report {
        name: ReportKind::Shapley.name(),
        columns: vec!["algorithm", "dimension", "budget_factor", "raw", "normalized", "sample_count"],
        rows,
        heatmap,
    })
}

fn complementarity(table: &PerformanceTable, options: &ReportOptions) -> Result<Report, ReportError> {
    let dims = check_complete(table)?;
    let baselines = present_baselines(table, &options.baselines)?;
    let columns = dims.iter().map(|d| format!("d{d}")).collect();
    let mut heatmap = Heatmap::new("distance to the nearest baseline".into(), table.algorithms(), columns);
    let mut rows = Vec::new();
    for &d in &dims {
        let sub = sub_table(table, d);
        for a in table.algorithms() {
            let contribution = baseline_contribution(&a, &baselines, table, d)?;
            let (distance, nearest) = nearest_baseline_distance(&a, &baselines, &sub)?;
            rows.push(vec![a.as_str().into(), d.into(), contribution.into(), nearest.into(), distance.into()]);
            heatmap.set(&a, &format!("d{d}"), distance);
        }
    }
    Ok(Report {
        name: ReportKind::Complementarity.name(),
        columns: vec![
            "algorithm",
            "dimension",
            "baseline_contribution",
            "nearest_baseline",
            "nearest_baseline_distance",
        ],
        rows,
        heatmap,
    })
}

pub fn build(kind: ReportKind, table: &PerformanceTable, options: &ReportOptions) -> Result<Report, ReportError> {
    match kind {
        ReportKind::AoccTable => aocc_table(table),
        ReportKind::AoccCdf => aocc_cdf(table),
        ReportKind::RsDominance => rs_dominance(table),
        ReportKind::Top3LossContribution => top3_loss_contribution(table, options),
        ReportKind::BestAtBudget => best_at_budget_report(table, options),
        ReportKind::Shapley => shapley(table, options),
        ReportKind::Complementarity => complementarity(table, options),
    }
}
