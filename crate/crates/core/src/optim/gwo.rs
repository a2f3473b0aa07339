//! Grey wolf optimizer (Mirjalili et al. 2014).
//!
//! The control parameter `a` decreases linearly from 2 to 0 over the
//! iterations the budget allows. Leaders are the three best positions seen
//! so far.

use rand::Rng as _;

use super::{uniform_point, AlgorithmSpec, BoundaryHandling, Family, Optimizer, ProblemInfo, Rng};

pub fn spec() -> AlgorithmSpec {
    AlgorithmSpec::new(
        "gwo",
        Family::Metaphor,
        BoundaryHandling::Clamp,
        false,
        &[("pack_size", 30.0)],
    )
}

pub fn build(spec: &AlgorithmSpec, info: &ProblemInfo) -> Box<dyn Optimizer> {
    let size = spec.positive_count("pack_size", 1);
    let max_iter = (info.budget / size as u64).max(1);
    Box::new(GreyWolves {
        info: *info,
        boundary: spec.boundary_handling,
        size,
        max_iter,
        iteration: 0,
        wolves: Vec::new(),
        leaders: Vec::new(),
    })
}

struct GreyWolves {
    info: ProblemInfo,
    boundary: BoundaryHandling,
    size: usize,
    max_iter: u64,
    iteration: u64,
    wolves: Vec<Vec<f64>>,
    /// Alpha, beta, delta with their objective values, best first.
    leaders: Vec<(Vec<f64>, f64)>,
}

impl Optimizer for GreyWolves {
    fn ask(&mut self, rng: &mut Rng) -> Vec<Vec<f64>> {
        if self.leaders.is_empty() {
            self.wolves = (0..self.size).map(|_| uniform_point(&self.info, rng)).collect();
            return self.wolves.clone();
        }
        let a = 2.0 * (1.0 - (self.iteration as f64 / self.max_iter as f64).min(1.0));
        for w in 0..self.size {
            for j in 0..self.info.dimension {
                let x = self.wolves[w][j];
                let mut sum = 0.0;
                for (leader, _) in &self.leaders {
                    let big_a = 2.0 * a * rng.random::<f64>() - a;
                    let big_c = 2.0 * rng.random::<f64>();
                    sum += leader[j] - big_a * (big_c * leader[j] - x).abs();
                }
                self.wolves[w][j] = sum / self.leaders.len() as f64;
            }
            self.boundary.repair(&mut self.wolves[w], &self.info, rng);
        }
        self.wolves.clone()
    }

    fn tell(&mut self, fitness: &[f64], _rng: &mut Rng) {
        self.iteration += 1;
        for (x, &f) in self.wolves.iter().zip(fitness) {
            let pos = self.leaders.iter().position(|(_, lf)| f < *lf);
            match pos {
                Some(p) => self.leaders.insert(p, (x.clone(), f)),
                None if self.leaders.len() < 3 => self.leaders.push((x.clone(), f)),
                None => {}
            }
            self.leaders.truncate(3);
        }
    }
}
