//! Differential evolution with binomial crossover.
//!
//! Two registered variants deliberately share the name family but not the
//! operators: `de-a` is DE/rand/1/bin with clamping, `de-b` is DE/best/1/bin
//! with uniform resampling of violating coordinates.

use rand::Rng as _;

use super::{
    argmin, uniform_point, AlgorithmSpec, BoundaryHandling, Family, Optimizer, ProblemInfo, Rng,
};

/// `mutation` parameter values.
const RAND_1: f64 = 0.0;
const BEST_1: f64 = 1.0;

pub fn spec_a() -> AlgorithmSpec {
    AlgorithmSpec::new(
        "de-a",
        Family::DifferentialEvolution,
        BoundaryHandling::Clamp,
        true,
        &[("f", 0.5), ("cr", 0.9), ("pop_per_dim", 10.0), ("mutation", RAND_1)],
    )
}

pub fn spec_b() -> AlgorithmSpec {
    AlgorithmSpec::new(
        "de-b",
        Family::DifferentialEvolution,
        BoundaryHandling::Resample,
        false,
        &[("f", 0.8), ("cr", 0.7), ("pop_per_dim", 5.0), ("mutation", BEST_1)],
    )
}

pub fn build(spec: &AlgorithmSpec, info: &ProblemInfo) -> Box<dyn Optimizer> {
    let size = ((spec.param("pop_per_dim") * info.dimension as f64).round() as usize).max(4);
    Box::new(DifferentialEvolution {
        info: *info,
        boundary: spec.boundary_handling,
        f: spec.param("f"),
        cr: spec.param("cr"),
        best_mutation: spec.param("mutation") == BEST_1,
        size,
        population: Vec::new(),
        fitness: Vec::new(),
        trials: Vec::new(),
    })
}

struct DifferentialEvolution {
    info: ProblemInfo,
    boundary: BoundaryHandling,
    f: f64,
    cr: f64,
    best_mutation: bool,
    size: usize,
    population: Vec<Vec<f64>>,
    fitness: Vec<f64>,
    trials: Vec<Vec<f64>>,
}

/// `count` distinct indices in `0..n`, all different from `exclude`.
fn distinct(n: usize, exclude: usize, count: usize, rng: &mut Rng) -> Vec<usize> {
    let mut picked = Vec::with_capacity(count);
    while picked.len() < count {
        let r = rng.random_range(0..n);
        if r != exclude && !picked.contains(&r) {
            picked.push(r);
        }
    }
    picked
}

impl DifferentialEvolution {
    fn trial(&self, i: usize, best: usize, rng: &mut Rng) -> Vec<f64> {
        let d = self.info.dimension;
        let pop = &self.population;
        let (base, r1, r2) = if self.best_mutation {
            let r = distinct(self.size, i, 2, rng);
            (best, r[0], r[1])
        } else {
            let r = distinct(self.size, i, 3, rng);
            (r[0], r[1], r[2])
        };
        let forced = rng.random_range(0..d);
        let mut trial: Vec<f64> = (0..d)
            .map(|j| {
                if j == forced || rng.random::<f64>() < self.cr {
                    pop[base][j] + self.f * (pop[r1][j] - pop[r2][j])
                } else {
                    pop[i][j]
                }
            })
            .collect();
        self.boundary.repair(&mut trial, &self.info, rng);
        trial
    }
}

impl Optimizer for DifferentialEvolution {
    fn ask(&mut self, rng: &mut Rng) -> Vec<Vec<f64>> {
        self.trials = if self.population.is_empty() {
            (0..self.size).map(|_| uniform_point(&self.info, rng)).collect()
        } else {
            let best = argmin(&self.fitness);
            (0..self.size).map(|i| self.trial(i, best, rng)).collect()
        };
        self.trials.clone()
    }

    fn tell(&mut self, fitness: &[f64], _rng: &mut Rng) {
        let trials = std::mem::take(&mut self.trials);
        if self.population.is_empty() {
            self.population = trials;
            self.fitness = fitness.to_vec();
            return;
        }
        for (i, (trial, &f)) in trials.into_iter().zip(fitness).enumerate() {
            if f <= self.fitness[i] {
                self.population[i] = trial;
                self.fitness[i] = f;
            }
        }
    }
}
