//! (1+1)-ES with the 1/5th success rule.
//!
//! On success the step size grows by `exp(1/3)`, on failure it shrinks by
//! `exp(-1/12)`, which is stationary at a success rate of 1/5. The strategy
//! restarts from a uniform point once the step size falls below `min_sigma`.

use rand_distr::{Distribution, StandardNormal};

use super::{uniform_point, AlgorithmSpec, BoundaryHandling, Family, Optimizer, ProblemInfo, Rng};

pub fn spec() -> AlgorithmSpec {
    AlgorithmSpec::new(
        "one-plus-one-es",
        Family::EvolutionStrategy,
        BoundaryHandling::Reflect,
        true,
        &[("sigma0", 0.2), ("min_sigma", 1e-12)],
    )
}

pub fn build(spec: &AlgorithmSpec, info: &ProblemInfo) -> Box<dyn Optimizer> {
    let range = info.upper - info.lower;
    Box::new(OnePlusOne {
        info: *info,
        boundary: spec.boundary_handling,
        sigma0: spec.param("sigma0") * range,
        min_sigma: spec.param("min_sigma") * range,
        sigma: spec.param("sigma0") * range,
        parent: None,
        pending: Vec::new(),
    })
}

struct OnePlusOne {
    info: ProblemInfo,
    boundary: BoundaryHandling,
    sigma0: f64,
    min_sigma: f64,
    sigma: f64,
    parent: Option<(Vec<f64>, f64)>,
    pending: Vec<f64>,
}

impl Optimizer for OnePlusOne {
    fn ask(&mut self, rng: &mut Rng) -> Vec<Vec<f64>> {
        let candidate = match &self.parent {
            None => uniform_point(&self.info, rng),
            Some((x, _)) => {
                let mut y: Vec<f64> = x
                    .iter()
                    .map(|v| {
                        let z: f64 = StandardNormal.sample(rng);
                        v + self.sigma * z
                    })
                    .collect();
                self.boundary.repair(&mut y, &self.info, rng);
                y
            }
        };
        self.pending = candidate.clone();
        vec![candidate]
    }

    fn tell(&mut self, fitness: &[f64], _rng: &mut Rng) {
        let f = fitness[0];
        let candidate = std::mem::take(&mut self.pending);
        match &mut self.parent {
            None => self.parent = Some((candidate, f)),
            Some((x, fx)) => {
                if f <= *fx {
                    *x = candidate;
                    *fx = f;
                    self.sigma *= (1.0f64 / 3.0).exp();
                } else {
                    self.sigma *= (-1.0f64 / 12.0).exp();
                }
                if self.sigma < self.min_sigma || !self.sigma.is_finite() {
                    self.parent = None;
                    self.sigma = self.sigma0;
                }
            }
        }
    }
}
