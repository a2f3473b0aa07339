//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use optbench_core::datastore::{Event, RunRecord, RunStatus, Trajectory};
use optbench_core::metrics::PerformanceTable;
use optbench_core::portfolio::{empty_portfolio_value, portfolio_value, PortfolioValueSpec, ValueMode};
use optbench_core::runner::RunKey;
use optbench_core::suite::FunctionId;
use rand::Rng;

/// AOCC by walking every evaluation and looking the best-so-far value up
/// with a linear scan.
pub fn brute_force_aocc(t: &Trajectory, lb: f64, ub: f64) -> f64 {
    let (llb, lub) = (lb.log10(), ub.log10());
    let mut sum = 0.0;
    for eval in 1..=t.budget {
        let best = t
            .events
            .iter()
            .filter(|e| e.eval <= eval)
            .map(|e| e.precision)
            .fold(f64::INFINITY, f64::min);
        let y = best.clamp(lb, ub);
        sum += 1.0 - (y.log10() - llb) / (lub - llb);
    }
    sum / t.budget as f64
}

/// Random valid trajectory with budget in `1..=max_budget`.
pub fn random_trajectory(rng: &mut impl Rng, max_budget: u64) -> Trajectory {
    let budget = rng.random_range(1..=max_budget);
    let mut events = Vec::new();
    let mut eval = 1;
    let mut log_p: f64 = rng.random_range(-2.0..10.0);
    loop {
        events.push(Event {
            eval,
            precision: 10f64.powf(log_p),
        });
        let step = rng.random_range(1..=budget.div_ceil(4).max(1));
        eval += step;
        log_p -= rng.random_range(0.01..3.0);
        if eval > budget || log_p < -12.0 {
            break;
        }
    }
    if rng.random_bool(0.1) {
        events[0].precision = f64::INFINITY;
    }
    Trajectory::new(budget, events).expect("generator yields valid trajectories")
}

pub fn random_record(rng: &mut impl Rng, index: u32) -> RunRecord {
    const NAMES: [&str; 4] = ["random-search", "de-a", "pso", "sep-cma-es"];
    let failed = rng.random_bool(0.05);
    let mut trajectory = random_trajectory(rng, 5_000);
    if failed {
        let keep = rng.random_range(0..=trajectory.events.len());
        trajectory.events.truncate(keep);
    }
    RunRecord {
        key: RunKey {
            algorithm: NAMES[index as usize % NAMES.len()].to_string(),
            function_id: FunctionId([1, 2, 3, 5, 6, 8][index as usize % 6]),
            dimension: [2, 5, 10, 20][index as usize % 4],
            instance_id: index / 24,
            repetition: index % 24,
        },
        seed: rng.random(),
        trajectory,
        status: if failed { RunStatus::Failed } else { RunStatus::Ok },
        wall_time: rng.random_range(0.0..100.0),
    }
}

/// Set value oriented so that larger is better, empty set included.
fn benefit(names: &[&str], table: &PerformanceTable, spec: PortfolioValueSpec) -> f64 {
    let v = if names.is_empty() {
        empty_portfolio_value(table, spec)
    } else {
        portfolio_value(names, table, spec).expect("complete table")
    };
    match spec.mode {
        ValueMode::FixedBudgetLogspace { .. } => -v,
        ValueMode::Aocc => v,
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Exact Shapley values multiplied by `n!`, from full subset enumeration.
/// When every set value is an integer the result is exact in `f64`.
pub fn exact_shapley_scaled(names: &[&str], table: &PerformanceTable, spec: PortfolioValueSpec) -> Vec<f64> {
    let n = names.len();
    assert!(n < 16, "enumeration is exponential");
    let values: Vec<f64> = (0u32..1 << n)
        .map(|mask| {
            let members: Vec<&str> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| names[i]).collect();
            benefit(&members, table, spec)
        })
        .collect();
    (0..n)
        .map(|i| {
            (0u32..1 << n)
                .filter(|mask| mask & (1 << i) == 0)
                .map(|mask| {
                    let k = mask.count_ones() as usize;
                    let weight = factorial(k) * factorial(n - k - 1);
                    weight * (values[(mask | (1 << i)) as usize] - values[mask as usize])
                })
                .sum()
        })
        .collect()
}

pub fn exact_shapley(names: &[&str], table: &PerformanceTable, spec: PortfolioValueSpec) -> Vec<f64> {
    let scale = factorial(names.len());
    exact_shapley_scaled(names, table, spec)
        .into_iter()
        .map(|v| v / scale)
        .collect()
}

/// `v(N) - v(empty)` in the same orientation as [`exact_shapley`].
pub fn grand_coalition_gain(names: &[&str], table: &PerformanceTable, spec: PortfolioValueSpec) -> f64 {
    benefit(names, table, spec) - benefit(&[], table, spec)
}
