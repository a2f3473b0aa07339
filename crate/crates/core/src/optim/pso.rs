//! Global-best particle swarm with constriction-equivalent coefficients.
//!
//! Positions leaving the domain are clamped and the offending velocity
//! component is set to zero.

use rand::Rng as _;

use super::{argmin, uniform_point, AlgorithmSpec, BoundaryHandling, Family, Optimizer, ProblemInfo, Rng};

pub fn spec() -> AlgorithmSpec {
    AlgorithmSpec::new(
        "pso",
        Family::ParticleSwarm,
        BoundaryHandling::Clamp,
        true,
        &[("inertia", 0.729), ("c1", 1.49), ("c2", 1.49), ("swarm_size", 40.0)],
    )
}

pub fn build(spec: &AlgorithmSpec, info: &ProblemInfo) -> Box<dyn Optimizer> {
    Box::new(Swarm {
        info: *info,
        inertia: spec.param("inertia"),
        c1: spec.param("c1"),
        c2: spec.param("c2"),
        size: spec.positive_count("swarm_size", 1),
        positions: Vec::new(),
        velocities: Vec::new(),
        personal: Vec::new(),
        personal_f: Vec::new(),
        global: Vec::new(),
        global_f: f64::INFINITY,
    })
}

struct Swarm {
    info: ProblemInfo,
    inertia: f64,
    c1: f64,
    c2: f64,
    size: usize,
    positions: Vec<Vec<f64>>,
    velocities: Vec<Vec<f64>>,
    personal: Vec<Vec<f64>>,
    personal_f: Vec<f64>,
    global: Vec<f64>,
    global_f: f64,
}

impl Optimizer for Swarm {
    fn ask(&mut self, rng: &mut Rng) -> Vec<Vec<f64>> {
        let (lo, hi) = (self.info.lower, self.info.upper);
        if self.positions.is_empty() {
            self.positions = (0..self.size).map(|_| uniform_point(&self.info, rng)).collect();
            // Half the distance to another uniform point.
            self.velocities = self
                .positions
                .iter()
                .map(|x| x.iter().map(|v| (rng.random_range(lo..=hi) - v) / 2.0).collect())
                .collect();
            return self.positions.clone();
        }
        for i in 0..self.size {
            for j in 0..self.info.dimension {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let x = self.positions[i][j];
                let v = self.inertia * self.velocities[i][j]
                    + self.c1 * r1 * (self.personal[i][j] - x)
                    + self.c2 * r2 * (self.global[j] - x);
                let moved = x + v;
                if moved < lo || moved > hi {
                    self.positions[i][j] = moved.clamp(lo, hi);
                    self.velocities[i][j] = 0.0;
                } else {
                    self.positions[i][j] = moved;
                    self.velocities[i][j] = v;
                }
            }
        }
        self.positions.clone()
    }

    fn tell(&mut self, fitness: &[f64], _rng: &mut Rng) {
        if self.personal.is_empty() {
            self.personal = self.positions.clone();
            self.personal_f = fitness.to_vec();
        } else {
            for (i, &f) in fitness.iter().enumerate() {
                if f <= self.personal_f[i] {
                    self.personal[i].clone_from(&self.positions[i]);
                    self.personal_f[i] = f;
                }
            }
        }
        let best = argmin(&self.personal_f);
        if self.global.is_empty() || self.personal_f[best] <= self.global_f {
            self.global.clone_from(&self.personal[best]);
            self.global_f = self.personal_f[best];
        }
    }
}
