//! Artificial bee colony (Karaboga 2005).
//!
//! One generation is three batches: employed bees, onlooker bees, and at
//! most one scout replacing a food source that stagnated for more than
//! `limit_factor * food_sources * d` trials.

use rand::Rng as _;

use super::{uniform_point, AlgorithmSpec, BoundaryHandling, Family, Optimizer, ProblemInfo, Rng};

pub fn spec() -> AlgorithmSpec {
    AlgorithmSpec::new(
        "abc",
        Family::Metaphor,
        BoundaryHandling::Clamp,
        false,
        &[("food_sources", 20.0), ("limit_factor", 1.0)],
    )
}

pub fn build(spec: &AlgorithmSpec, info: &ProblemInfo) -> Box<dyn Optimizer> {
    let sources = spec.positive_count("food_sources", 2);
    let limit = (spec.param("limit_factor") * (sources * info.dimension) as f64).max(1.0) as u32;
    Box::new(BeeColony {
        info: *info,
        boundary: spec.boundary_handling,
        sources,
        limit,
        foods: Vec::new(),
        fitness: Vec::new(),
        trials: Vec::new(),
        phase: Phase::Init,
        pending: Vec::new(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Phase {
    Init,
    Employed,
    Onlooker,
    Scout,
}

struct BeeColony {
    info: ProblemInfo,
    boundary: BoundaryHandling,
    sources: usize,
    limit: u32,
    foods: Vec<Vec<f64>>,
    fitness: Vec<f64>,
    trials: Vec<u32>,
    phase: Phase,
    /// Food source index and candidate for each slot of the last batch.
    pending: Vec<(usize, Vec<f64>)>,
}

/// Karaboga's fitness transform of an objective value.
fn quality(f: f64) -> f64 {
    if f >= 0.0 {
        1.0 / (1.0 + f)
    } else {
        1.0 + f.abs()
    }
}

impl BeeColony {
    fn neighbour(&self, i: usize, rng: &mut Rng) -> Vec<f64> {
        let mut k = rng.random_range(0..self.sources - 1);
        if k >= i {
            k += 1;
        }
        let j = rng.random_range(0..self.info.dimension);
        let phi: f64 = rng.random_range(-1.0..=1.0);
        let mut v = self.foods[i].clone();
        v[j] += phi * (self.foods[i][j] - self.foods[k][j]);
        self.boundary.repair(&mut v, &self.info, rng);
        v
    }

    fn roulette(&self, rng: &mut Rng) -> usize {
        let q: Vec<f64> = self.fitness.iter().map(|&f| quality(f)).collect();
        let total: f64 = q.iter().sum();
        if !total.is_finite() || total <= 0.0 {
            return rng.random_range(0..self.sources);
        }
        let mut target = rng.random::<f64>() * total;
        for (i, w) in q.iter().enumerate() {
            if target < *w {
                return i;
            }
            target -= w;
        }
        self.sources - 1
    }

    fn greedy(&mut self, i: usize, candidate: Vec<f64>, f: f64) {
        if f <= self.fitness[i] {
            self.foods[i] = candidate;
            self.fitness[i] = f;
            self.trials[i] = 0;
        } else {
            self.trials[i] += 1;
        }
    }
}

impl Optimizer for BeeColony {
    fn ask(&mut self, rng: &mut Rng) -> Vec<Vec<f64>> {
        if self.phase == Phase::Scout {
            let worst = (0..self.sources).max_by_key(|&i| self.trials[i]).unwrap_or(0);
            if self.trials[worst] > self.limit {
                self.pending = vec![(worst, uniform_point(&self.info, rng))];
                return vec![self.pending[0].1.clone()];
            }
            self.phase = Phase::Employed;
        }
        self.pending = match self.phase {
            Phase::Init => (0..self.sources)
                .map(|i| (i, uniform_point(&self.info, rng)))
                .collect(),
            Phase::Employed => (0..self.sources).map(|i| (i, self.neighbour(i, rng))).collect(),
            Phase::Onlooker => (0..self.sources)
                .map(|_| {
                    let i = self.roulette(rng);
                    (i, self.neighbour(i, rng))
                })
                .collect(),
            Phase::Scout => unreachable!("handled above"),
        };
        self.pending.iter().map(|(_, x)| x.clone()).collect()
    }

    fn tell(&mut self, fitness: &[f64], _rng: &mut Rng) {
        let pending = std::mem::take(&mut self.pending);
        self.phase = match self.phase {
            Phase::Init => {
                self.foods = pending.into_iter().map(|(_, x)| x).collect();
                self.fitness = fitness.to_vec();
                self.trials = vec![0; self.sources];
                Phase::Employed
            }
            Phase::Employed => {
                for ((i, x), &f) in pending.into_iter().zip(fitness) {
                    self.greedy(i, x, f);
                }
                Phase::Onlooker
            }
            Phase::Onlooker => {
                for ((i, x), &f) in pending.into_iter().zip(fitness) {
                    self.greedy(i, x, f);
                }
                Phase::Scout
            }
            Phase::Scout => {
                let (i, x) = pending.into_iter().next().expect("scout batch has one bee");
                self.foods[i] = x;
                self.fitness[i] = fitness[0];
                self.trials[i] = 0;
                Phase::Employed
            }
        };
    }
}
