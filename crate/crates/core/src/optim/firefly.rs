//! Firefly algorithm (Yang 2008).
//!
//! Each firefly moves towards every brighter one with attractiveness
//! `beta0 * exp(-gamma * r^2)` plus a uniform random walk whose scale decays
//! geometrically per generation; the brightest only walks. Moves are not
//! greedy.

use rand::Rng as _;

use super::{uniform_point, AlgorithmSpec, BoundaryHandling, Family, Optimizer, ProblemInfo, Rng};

pub fn spec() -> AlgorithmSpec {
    AlgorithmSpec::new(
        "firefly",
        Family::Metaphor,
        BoundaryHandling::Clamp,
        false,
        &[
            ("swarm_size", 20.0),
            ("alpha", 0.2),
            ("alpha_decay", 0.97),
            ("beta0", 1.0),
            ("gamma", 0.01),
        ],
    )
}

pub fn build(spec: &AlgorithmSpec, info: &ProblemInfo) -> Box<dyn Optimizer> {
    Box::new(Fireflies {
        info: *info,
        boundary: spec.boundary_handling,
        size: spec.positive_count("swarm_size", 1),
        alpha: spec.param("alpha"),
        alpha_decay: spec.param("alpha_decay"),
        beta0: spec.param("beta0"),
        gamma: spec.param("gamma"),
        swarm: Vec::new(),
        brightness: Vec::new(),
    })
}

struct Fireflies {
    info: ProblemInfo,
    boundary: BoundaryHandling,
    size: usize,
    alpha: f64,
    alpha_decay: f64,
    beta0: f64,
    gamma: f64,
    swarm: Vec<Vec<f64>>,
    /// Objective values; lower is brighter.
    brightness: Vec<f64>,
}

impl Optimizer for Fireflies {
    fn ask(&mut self, rng: &mut Rng) -> Vec<Vec<f64>> {
        if self.brightness.is_empty() {
            self.swarm = (0..self.size).map(|_| uniform_point(&self.info, rng)).collect();
            return self.swarm.clone();
        }
        let range = self.info.upper - self.info.lower;
        let old = self.swarm.clone();
        for i in 0..self.size {
            let mut x = old[i].clone();
            for j in 0..self.size {
                if self.brightness[j] < self.brightness[i] {
                    let r2: f64 = x.iter().zip(&old[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                    let attraction = self.beta0 * (-self.gamma * r2).exp();
                    for (v, target) in x.iter_mut().zip(&old[j]) {
                        *v += attraction * (target - *v);
                    }
                }
            }
            for v in x.iter_mut() {
                *v += self.alpha * (rng.random::<f64>() - 0.5) * range;
            }
            self.boundary.repair(&mut x, &self.info, rng);
            self.swarm[i] = x;
        }
        self.alpha *= self.alpha_decay;
        self.swarm.clone()
    }

    fn tell(&mut self, fitness: &[f64], _rng: &mut Rng) {
        self.brightness = fitness.to_vec();
    }
}
