//! Cuckoo search (Yang & Deb 2009) with Mantegna Lévy flights.
//!
//! A generation is two batches: Lévy flights for every nest, then the
//! abandonment step that rebuilds each coordinate with probability `pa`
//! from the difference of two random nests. Both batches are greedy.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{argmin, uniform_point, AlgorithmSpec, BoundaryHandling, Family, Optimizer, ProblemInfo, Rng};

pub fn spec() -> AlgorithmSpec {
    AlgorithmSpec::new(
        "cs",
        Family::Metaphor,
        BoundaryHandling::Clamp,
        false,
        &[("nests", 25.0), ("pa", 0.25), ("alpha", 0.01), ("beta", 1.5)],
    )
}

pub fn build(spec: &AlgorithmSpec, info: &ProblemInfo) -> Box<dyn Optimizer> {
    let beta = spec.param("beta").clamp(0.3, 1.99);
    Box::new(CuckooSearch {
        info: *info,
        boundary: spec.boundary_handling,
        size: spec.positive_count("nests", 2),
        pa: spec.param("pa"),
        alpha: spec.param("alpha"),
        beta,
        sigma_u: mantegna_sigma(beta),
        nests: Vec::new(),
        fitness: Vec::new(),
        pending: Vec::new(),
        levy_phase: true,
    })
}

/// Lanczos approximation of the gamma function (g = 7, n = 9).
pub(crate) fn gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let series = COEF[1..]
        .iter()
        .enumerate()
        .fold(COEF[0], |acc, (i, c)| acc + c / (x + i as f64 + 1.0));
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * series
}

/// Standard deviation of the numerator in Mantegna's algorithm.
pub(crate) fn mantegna_sigma(beta: f64) -> f64 {
    let num = gamma(1.0 + beta) * (PI * beta / 2.0).sin();
    let den = gamma((1.0 + beta) / 2.0) * beta * 2f64.powf((beta - 1.0) / 2.0);
    (num / den).powf(1.0 / beta)
}

struct CuckooSearch {
    info: ProblemInfo,
    boundary: BoundaryHandling,
    size: usize,
    pa: f64,
    alpha: f64,
    beta: f64,
    sigma_u: f64,
    nests: Vec<Vec<f64>>,
    fitness: Vec<f64>,
    pending: Vec<Vec<f64>>,
    levy_phase: bool,
}

impl CuckooSearch {
    fn levy_step(&self, rng: &mut Rng) -> f64 {
        let u = Normal::new(0.0, self.sigma_u).expect("finite sigma").sample(rng);
        let v: f64 = StandardNormal.sample(rng);
        u / v.abs().powf(1.0 / self.beta)
    }
}

impl Optimizer for CuckooSearch {
    fn ask(&mut self, rng: &mut Rng) -> Vec<Vec<f64>> {
        self.pending = if self.nests.is_empty() {
            (0..self.size).map(|_| uniform_point(&self.info, rng)).collect()
        } else if self.levy_phase {
            let best = self.nests[argmin(&self.fitness)].clone();
            let mut out = Vec::with_capacity(self.size);
            for nest in &self.nests {
                let mut x: Vec<f64> = nest
                    .iter()
                    .zip(&best)
                    .map(|(v, b)| {
                        let step = self.alpha * self.levy_step(rng) * (v - b);
                        let z: f64 = StandardNormal.sample(rng);
                        v + step * z
                    })
                    .collect();
                self.boundary.repair(&mut x, &self.info, rng);
                out.push(x);
            }
            out
        } else {
            let mut p1: Vec<usize> = (0..self.size).collect();
            let mut p2 = p1.clone();
            p1.shuffle(rng);
            p2.shuffle(rng);
            let mut out = Vec::with_capacity(self.size);
            for i in 0..self.size {
                let r: f64 = rng.random();
                let mut x: Vec<f64> = (0..self.info.dimension)
                    .map(|j| {
                        let v = self.nests[i][j];
                        if rng.random::<f64>() < self.pa {
                            v + r * (self.nests[p1[i]][j] - self.nests[p2[i]][j])
                        } else {
                            v
                        }
                    })
                    .collect();
                self.boundary.repair(&mut x, &self.info, rng);
                out.push(x);
            }
            out
        };
        self.pending.clone()
    }

    fn tell(&mut self, fitness: &[f64], _rng: &mut Rng) {
        let pending = std::mem::take(&mut self.pending);
        if self.nests.is_empty() {
            self.nests = pending;
            self.fitness = fitness.to_vec();
            return;
        }
        for (i, (x, &f)) in pending.into_iter().zip(fitness).enumerate() {
            if f <= self.fitness[i] {
                self.nests[i] = x;
                self.fitness[i] = f;
            }
        }
        self.levy_phase = !self.levy_phase;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_known_values() {
        assert!((gamma(1.0) - 1.0).abs() < 1e-12);
        assert!((gamma(5.0) - 24.0).abs() < 1e-10);
        assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-12);
        assert!((gamma(2.5) - 1.329_340_388_179_137).abs() < 1e-12);
    }

    #[test]
    fn mantegna_sigma_for_three_halves() {
        // Commonly quoted value for beta = 1.5.
        assert!((mantegna_sigma(1.5) - 0.696_574_502_557_696_4).abs() < 1e-9);
    }
}
