//! Uniform random sampling over the domain.

use super::{uniform_point, AlgorithmSpec, BoundaryHandling, Family, Optimizer, ProblemInfo, Rng};

pub fn spec() -> AlgorithmSpec {
    AlgorithmSpec::new(
        "random-search",
        Family::RandomSearch,
        BoundaryHandling::Clamp,
        true,
        &[],
    )
}

pub fn build(_spec: &AlgorithmSpec, info: &ProblemInfo) -> Box<dyn Optimizer> {
    Box::new(RandomSearch { info: *info })
}

struct RandomSearch {
    info: ProblemInfo,
}

impl Optimizer for RandomSearch {
    fn ask(&mut self, rng: &mut Rng) -> Vec<Vec<f64>> {
        vec![uniform_point(&self.info, rng)]
    }

    fn tell(&mut self, _fitness: &[f64], _rng: &mut Rng) {}
}
