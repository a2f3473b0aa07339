use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{ProblemInfo, Rng};

/// How a candidate outside the domain is brought back inside.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryHandling {
    /// Project each coordinate onto the nearest bound.
    Clamp,
    /// Mirror at the violated bound (repeatedly, for far-out coordinates).
    Reflect,
    /// Redraw each violating coordinate uniformly inside the domain.
    Resample,
}

impl BoundaryHandling {
    pub fn repair(self, x: &mut [f64], info: &ProblemInfo, rng: &mut Rng) {
        let (lo, hi) = (info.lower, info.upper);
        for v in x.iter_mut() {
            if (lo..=hi).contains(v) {
                continue;
            }
            *v = match self {
                BoundaryHandling::Clamp => v.clamp(lo, hi),
                BoundaryHandling::Reflect => {
                    let width = hi - lo;
                    let t = (*v - lo).rem_euclid(2.0 * width);
                    let folded = if t > width { 2.0 * width - t } else { t };
                    (lo + folded).clamp(lo, hi)
                }
                BoundaryHandling::Resample => rng.random_range(lo..=hi),
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn info() -> ProblemInfo {
        ProblemInfo {
            dimension: 3,
            lower: -5.0,
            upper: 5.0,
            budget: 10,
        }
    }

    #[test]
    fn clamp_projects() {
        let mut rng = Rng::seed_from_u64(0);
        let mut x = [-7.0, 1.0, 12.0];
        BoundaryHandling::Clamp.repair(&mut x, &info(), &mut rng);
        assert_eq!(x, [-5.0, 1.0, 5.0]);
    }

    #[test]
    fn reflect_mirrors() {
        let mut rng = Rng::seed_from_u64(0);
        let mut x = [-7.0, 1.0, 6.5];
        BoundaryHandling::Reflect.repair(&mut x, &info(), &mut rng);
        assert_eq!(x, [-3.0, 1.0, 3.5]);
        let mut far = [27.0, -5.0, 5.0];
        BoundaryHandling::Reflect.repair(&mut far, &info(), &mut rng);
        assert_eq!(far, [3.0, -5.0, 5.0]);
    }

    #[test]
    fn resample_only_touches_violations() {
        let mut rng = Rng::seed_from_u64(3);
        let mut x = [-70.0, 1.25, 9.0];
        BoundaryHandling::Resample.repair(&mut x, &info(), &mut rng);
        assert_eq!(x[1], 1.25);
        assert!(x.iter().all(|v| (-5.0..=5.0).contains(v)));
    }
}
