//! Separable CMA-ES (diagonal covariance matrix).
//!
//! Standard CMA-ES default strategy parameters with the rank-one and rank-mu
//! learning rates scaled by `(d + 2) / 3` as in Ros & Hansen (2008).
//! Infeasible samples are reflected into the domain and the repaired points
//! are used for the update. The state is reinitialised from a uniform mean
//! when the step size collapses or the diagonal becomes ill-conditioned.

use rand_distr::{Distribution, StandardNormal};

use super::{uniform_point, AlgorithmSpec, BoundaryHandling, Family, Optimizer, ProblemInfo, Rng};

pub fn spec() -> AlgorithmSpec {
    AlgorithmSpec::new(
        "sep-cma-es",
        Family::CovarianceAdaptation,
        BoundaryHandling::Reflect,
        true,
        // popsize 0 selects the default 4 + floor(3 ln d).
        &[("sigma0", 0.2), ("popsize", 0.0), ("min_sigma", 1e-12)],
    )
}

pub fn build(spec: &AlgorithmSpec, info: &ProblemInfo) -> Box<dyn Optimizer> {
    let d = info.dimension;
    let default_lambda = 4 + (3.0 * (d as f64).ln()).floor() as usize;
    let lambda = match spec.param("popsize").round() as usize {
        0 => default_lambda,
        n => n.max(2),
    };
    let range = info.upper - info.lower;
    let params = Strategy::new(d, lambda);
    Box::new(SepCmaEs {
        info: *info,
        boundary: spec.boundary_handling,
        sigma0: spec.param("sigma0") * range,
        min_sigma: spec.param("min_sigma") * range,
        params,
        state: None,
        pending: Vec::new(),
    })
}

struct Strategy {
    lambda: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
}

impl Strategy {
    fn new(d: usize, lambda: usize) -> Self {
        let n = d as f64;
        let mu = (lambda / 2).max(1);
        let raw: Vec<f64> = (1..=mu)
            .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma =
            1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let sep = (n + 2.0) / 3.0;
        let c_1 = (sep * 2.0 / ((n + 1.3).powi(2) + mu_eff)).min(1.0);
        let c_mu_full = 2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff);
        let c_mu = (sep * c_mu_full).min(1.0 - c_1);
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        Strategy {
            lambda,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
        }
    }
}

struct State {
    mean: Vec<f64>,
    sigma: f64,
    diag_c: Vec<f64>,
    p_sigma: Vec<f64>,
    p_c: Vec<f64>,
    generation: u32,
}

struct SepCmaEs {
    info: ProblemInfo,
    boundary: BoundaryHandling,
    sigma0: f64,
    min_sigma: f64,
    params: Strategy,
    state: Option<State>,
    pending: Vec<Vec<f64>>,
}

impl SepCmaEs {
    fn fresh_state(&self, rng: &mut Rng) -> State {
        let d = self.info.dimension;
        State {
            mean: uniform_point(&self.info, rng),
            sigma: self.sigma0,
            diag_c: vec![1.0; d],
            p_sigma: vec![0.0; d],
            p_c: vec![0.0; d],
            generation: 0,
        }
    }

    fn degenerate(&self, s: &State) -> bool {
        let max_c = s.diag_c.iter().cloned().fold(0.0, f64::max);
        let min_c = s.diag_c.iter().cloned().fold(f64::INFINITY, f64::min);
        !s.sigma.is_finite()
            || s.sigma * max_c.sqrt() < self.min_sigma
            || min_c.is_nan() || min_c <= 0.0
            || max_c / min_c > 1e14
            || s.mean.iter().any(|v| !v.is_finite())
    }
}

impl Optimizer for SepCmaEs {
    fn ask(&mut self, rng: &mut Rng) -> Vec<Vec<f64>> {
        if self.state.is_none() {
            self.state = Some(self.fresh_state(rng));
        }
        let s = self.state.as_ref().expect("state initialised above");
        let mut batch = Vec::with_capacity(self.params.lambda);
        for _ in 0..self.params.lambda {
            let mut x: Vec<f64> = s
                .mean
                .iter()
                .zip(&s.diag_c)
                .map(|(m, c)| {
                    let z: f64 = StandardNormal.sample(rng);
                    m + s.sigma * c.sqrt() * z
                })
                .collect();
            self.boundary.repair(&mut x, &self.info, rng);
            batch.push(x);
        }
        self.pending = batch.clone();
        batch
    }

    fn tell(&mut self, fitness: &[f64], _rng: &mut Rng) {
        let p = &self.params;
        let d = self.info.dimension;
        let mut order: Vec<usize> = (0..fitness.len()).collect();
        order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]));
        let s = self.state.as_mut().expect("tell before ask");

        let steps: Vec<Vec<f64>> = order
            .iter()
            .take(p.weights.len())
            .map(|&k| {
                self.pending[k]
                    .iter()
                    .zip(&s.mean)
                    .map(|(x, m)| (x - m) / s.sigma)
                    .collect()
            })
            .collect();
        let mut y_w = vec![0.0; d];
        for (w, y) in p.weights.iter().zip(&steps) {
            for j in 0..d {
                y_w[j] += w * y[j];
            }
        }
        for j in 0..d {
            s.mean[j] += s.sigma * y_w[j];
        }

        s.generation += 1;
        let cs = p.c_sigma;
        let norm_factor = (cs * (2.0 - cs) * p.mu_eff).sqrt();
        for j in 0..d {
            s.p_sigma[j] = (1.0 - cs) * s.p_sigma[j] + norm_factor * y_w[j] / s.diag_c[j].sqrt();
        }
        let ps_norm = s.p_sigma.iter().map(|v| v * v).sum::<f64>().sqrt();
        let correction = (1.0 - (1.0 - cs).powi(2 * s.generation as i32)).sqrt();
        let h_sigma = ps_norm / correction < (1.4 + 2.0 / (d as f64 + 1.0)) * p.chi_n;
        let cc = p.c_c;
        let pc_factor = if h_sigma { (cc * (2.0 - cc) * p.mu_eff).sqrt() } else { 0.0 };
        let delta = if h_sigma { 0.0 } else { cc * (2.0 - cc) };
        for j in 0..d {
            s.p_c[j] = (1.0 - cc) * s.p_c[j] + pc_factor * y_w[j];
            let rank_mu: f64 = p.weights.iter().zip(&steps).map(|(w, y)| w * y[j] * y[j]).sum();
            s.diag_c[j] = (1.0 - p.c_1 - p.c_mu) * s.diag_c[j]
                + p.c_1 * (s.p_c[j] * s.p_c[j] + delta * s.diag_c[j])
                + p.c_mu * rank_mu;
        }
        s.sigma *= ((cs / p.d_sigma) * (ps_norm / p.chi_n - 1.0)).min(1.0).exp();

        if self.degenerate(self.state.as_ref().expect("state present")) {
            self.state = None;
        }
    }
}
