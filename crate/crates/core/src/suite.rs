//! Benchmark problem suite: base test functions, seeded instances and
//! precision bookkeeping.
//!
//! Function numbering follows BBOB where a function is implemented. The
//! instance transformation (optimum shift, value offset, rotation) is this
//! crate's own seeded scheme and does not reproduce COCO instances.
//!
//! | id | function | rotated |
//! |----|----------|---------|
//! | 1  | sphere | no |
//! | 2  | separable ellipsoid | no |
//! | 3  | Rastrigin (conditioned) | no |
//! | 5  | linear slope | no |
//! | 6  | attractive sector | yes |
//! | 8  | Rosenbrock | no |
//! | 10 | rotated ellipsoid | yes |
//! | 11 | discus | yes |
//! | 12 | bent cigar | yes |
//! | 14 | sum of different powers | yes |
//! | 17 | Schaffers F7 | yes |
//! | 20 | Schwefel | no |

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mix;

pub const DOMAIN_LOWER: f64 = -5.0;
pub const DOMAIN_UPPER: f64 = 5.0;
/// A run counts as solved once its precision reaches this value.
pub const SOLVED_PRECISION: f64 = 1e-8;
pub const MAX_DIMENSION: usize = 40;

/// Margin kept between shifted optima and the domain boundary.
const OPTIMUM_RANGE: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SuiteError {
    #[error("function id {0} is not implemented")]
    UnknownFunction(u32),
    #[error("invalid dimension {0}: must be in 1..={MAX_DIMENSION}")]
    InvalidDimension(usize),
    #[error("point has {got} coordinates, instance dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Suite-local function identifier (BBOB numbering).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FunctionId(pub u32);

impl FunctionId {
    /// All implemented ids in ascending order.
    pub const IMPLEMENTED: [FunctionId; 12] = [
        FunctionId(1),
        FunctionId(2),
        FunctionId(3),
        FunctionId(5),
        FunctionId(6),
        FunctionId(8),
        FunctionId(10),
        FunctionId(11),
        FunctionId(12),
        FunctionId(14),
        FunctionId(17),
        FunctionId(20),
    ];

    pub fn is_implemented(self) -> bool {
        BaseFunction::from_id(self).is_some()
    }

    pub fn name(self) -> Option<&'static str> {
        BaseFunction::from_id(self).map(BaseFunction::name)
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BaseFunction {
    Sphere,
    SeparableEllipsoid,
    Rastrigin,
    LinearSlope,
    AttractiveSector,
    Rosenbrock,
    RotatedEllipsoid,
    Discus,
    BentCigar,
    DifferentPowers,
    SchaffersF7,
    Schwefel,
}

impl BaseFunction {
    fn from_id(id: FunctionId) -> Option<Self> {
        use BaseFunction::*;
        Some(match id.0 {
            1 => Sphere,
            2 => SeparableEllipsoid,
            3 => Rastrigin,
            5 => LinearSlope,
            6 => AttractiveSector,
            8 => Rosenbrock,
            10 => RotatedEllipsoid,
            11 => Discus,
            12 => BentCigar,
            14 => DifferentPowers,
            17 => SchaffersF7,
            20 => Schwefel,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        use BaseFunction::*;
        match self {
            Sphere => "sphere",
            SeparableEllipsoid => "separable-ellipsoid",
            Rastrigin => "rastrigin",
            LinearSlope => "linear-slope",
            AttractiveSector => "attractive-sector",
            Rosenbrock => "rosenbrock",
            RotatedEllipsoid => "rotated-ellipsoid",
            Discus => "discus",
            BentCigar => "bent-cigar",
            DifferentPowers => "different-powers",
            SchaffersF7 => "schaffers-f7",
            Schwefel => "schwefel",
        }
    }

    fn rotated(self) -> bool {
        use BaseFunction::*;
        matches!(
            self,
            AttractiveSector | RotatedEllipsoid | Discus | BentCigar | DifferentPowers | SchaffersF7
        )
    }
}

/// Best-so-far function value minus the instance optimum.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Precision(f64);

impl Precision {
    /// Clamps negative and NaN inputs to zero; `+inf` is kept.
    pub fn new(value: f64) -> Self {
        if value.is_nan() || value < 0.0 {
            Precision(0.0)
        } else {
            Precision(value)
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_solved(self) -> bool {
        self.0 <= SOLVED_PRECISION
    }
}

/// Audit record of an instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceMetadata {
    pub function_id: FunctionId,
    pub instance_id: u32,
    pub dimension: usize,
    pub f_opt: f64,
    pub x_opt: Vec<f64>,
}

/// A concrete, immutable instance of a base function.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance {
    function_id: FunctionId,
    base: BaseFunction,
    instance_id: u32,
    dimension: usize,
    x_opt: Vec<f64>,
    f_opt: f64,
    transform_seed: u64,
    /// Row-major orthogonal matrix for rotated functions.
    rotation: Option<Vec<f64>>,
}

/// Seed for the instance transform of `(function_id, instance_id, dimension)`.
pub fn transform_seed(function_id: FunctionId, instance_id: u32, dimension: usize) -> u64 {
    mix::mix_words(
        0x6f70_7462_656e_6368,
        &[
            u64::from(function_id.0),
            u64::from(instance_id),
            dimension as u64,
        ],
    )
}

pub fn make_instance(
    function_id: FunctionId,
    instance_id: u32,
    dimension: usize,
) -> Result<ProblemInstance, SuiteError> {
    let base = BaseFunction::from_id(function_id).ok_or(SuiteError::UnknownFunction(function_id.0))?;
    if dimension == 0 || dimension > MAX_DIMENSION {
        return Err(SuiteError::InvalidDimension(dimension));
    }
    let seed = transform_seed(function_id, instance_id, dimension);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let f_opt = (rng.random_range(-100.0..=100.0_f64) * 100.0).round() / 100.0;
    let x_opt: Vec<f64> = match base {
        // The slope optimum sits on a seeded corner of the domain.
        BaseFunction::LinearSlope => (0..dimension)
            .map(|_| if rng.random_bool(0.5) { DOMAIN_UPPER } else { DOMAIN_LOWER })
            .collect(),
        _ => (0..dimension)
            .map(|_| rng.random_range(-OPTIMUM_RANGE..=OPTIMUM_RANGE))
            .collect(),
    };
    let rotation = base.rotated().then(|| random_rotation(dimension, &mut rng));

    Ok(ProblemInstance {
        function_id,
        base,
        instance_id,
        dimension,
        x_opt,
        f_opt,
        transform_seed: seed,
        rotation,
    })
}

/// Random orthogonal matrix: QR of a Gaussian matrix with the signs fixed so
/// that R has a positive diagonal (modified Gram-Schmidt gives that directly).
fn random_rotation(dimension: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = dimension;
    let mut cols: Vec<Vec<f64>> = (0..d)
        .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    for j in 0..d {
        for k in 0..j {
            let (done, rest) = cols.split_at_mut(j);
            let proj: f64 = done[k].iter().zip(&rest[0]).map(|(a, b)| a * b).sum();
            for (c, q) in rest[0].iter_mut().zip(&done[k]) {
                *c -= proj * q;
            }
        }
        let norm = cols[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        for c in cols[j].iter_mut() {
            *c /= norm;
        }
    }
    // Rows of the returned matrix are the orthonormal columns.
    cols.into_iter().flatten().collect()
}

/// `base^(exponent * i / (d - 1))` for i in 0..d, or all ones when d = 1.
fn graded(d: usize, i: usize, base: f64, exponent: f64) -> f64 {
    if d == 1 {
        1.0
    } else {
        base.powf(exponent * i as f64 / (d - 1) as f64)
    }
}

fn boundary_penalty(x: &[f64], limit: f64) -> f64 {
    x.iter()
        .map(|&v| {
            let excess = v.abs() - limit;
            if excess > 0.0 {
                excess * excess
            } else {
                0.0
            }
        })
        .sum()
}

/// Location of the one-dimensional maximum of `u * sin(sqrt(|u|))` on [-500, 500].
const SCHWEFEL_ARGMAX: f64 = 420.968_746_227_503_6;

impl ProblemInstance {
    pub fn function_id(&self) -> FunctionId {
        self.function_id
    }

    pub fn instance_id(&self) -> u32 {
        self.instance_id
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn x_opt(&self) -> &[f64] {
        &self.x_opt
    }

    pub fn f_opt(&self) -> f64 {
        self.f_opt
    }

    pub fn transform_seed(&self) -> u64 {
        self.transform_seed
    }

    pub fn function_name(&self) -> &'static str {
        self.base.name()
    }

    pub fn bounds(&self) -> (f64, f64) {
        (DOMAIN_LOWER, DOMAIN_UPPER)
    }

    pub fn metadata(&self) -> InstanceMetadata {
        InstanceMetadata {
            function_id: self.function_id,
            instance_id: self.instance_id,
            dimension: self.dimension,
            f_opt: self.f_opt,
            x_opt: self.x_opt.clone(),
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64, SuiteError> {
        if x.len() != self.dimension {
            return Err(SuiteError::DimensionMismatch {
                expected: self.dimension,
                got: x.len(),
            });
        }
        Ok(self.f_opt + self.raw(x))
    }

    pub fn precision_of(&self, raw_value: f64) -> Precision {
        Precision::new(raw_value - self.f_opt)
    }

    fn shifted(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.x_opt).map(|(a, b)| a - b).collect()
    }

    fn rotate(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dimension;
        let r = self.rotation.as_ref().expect("rotated function without rotation matrix");
        (0..d)
            .map(|i| r[i * d..(i + 1) * d].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Objective value relative to `f_opt`; zero at the optimum.
    fn raw(&self, x: &[f64]) -> f64 {
        let d = self.dimension;
        match self.base {
            BaseFunction::Sphere => self.shifted(x).iter().map(|z| z * z).sum(),
            BaseFunction::SeparableEllipsoid => ellipsoid(&self.shifted(x)),
            BaseFunction::Rastrigin => {
                let z: Vec<f64> = self
                    .shifted(x)
                    .iter()
                    .enumerate()
                    .map(|(i, v)| graded(d, i, 10.0, 0.5) * v)
                    .collect();
                let cos_sum: f64 = z.iter().map(|v| (2.0 * PI * v).cos()).sum();
                10.0 * (d as f64 - cos_sum) + z.iter().map(|v| v * v).sum::<f64>()
            }
            BaseFunction::LinearSlope => x
                .iter()
                .zip(&self.x_opt)
                .enumerate()
                .map(|(i, (&xi, &opt))| {
                    let slope = opt.signum() * graded(d, i, 10.0, 1.0);
                    // Beyond the optimum corner the function stays flat.
                    let z = if opt * xi < DOMAIN_UPPER * DOMAIN_UPPER { xi } else { opt };
                    DOMAIN_UPPER * slope.abs() - slope * z
                })
                .sum(),
            BaseFunction::AttractiveSector => {
                let rotated = self.rotate(&self.shifted(x));
                let sum: f64 = rotated
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let z = graded(d, i, 10.0, 0.5) * v;
                        let s = if z * self.x_opt[i] > 0.0 { 100.0 } else { 1.0 };
                        (s * z) * (s * z)
                    })
                    .sum();
                sum.powf(0.9)
            }
            BaseFunction::Rosenbrock => {
                let scale = 1f64.max((d as f64).sqrt() / 8.0);
                let z: Vec<f64> = self.shifted(x).iter().map(|v| scale * v + 1.0).collect();
                z.windows(2)
                    .map(|w| {
                        let a = w[0] * w[0] - w[1];
                        let b = w[0] - 1.0;
                        100.0 * a * a + b * b
                    })
                    .sum()
            }
            BaseFunction::RotatedEllipsoid => ellipsoid(&self.rotate(&self.shifted(x))),
            BaseFunction::Discus => {
                let z = self.rotate(&self.shifted(x));
                1e6 * z[0] * z[0] + z[1..].iter().map(|v| v * v).sum::<f64>()
            }
            BaseFunction::BentCigar => {
                let z = self.rotate(&self.shifted(x));
                z[0] * z[0] + 1e6 * z[1..].iter().map(|v| v * v).sum::<f64>()
            }
            BaseFunction::DifferentPowers => {
                let z = self.rotate(&self.shifted(x));
                z.iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let p = if d == 1 { 2.0 } else { 2.0 + 4.0 * i as f64 / (d - 1) as f64 };
                        v.abs().powf(p)
                    })
                    .sum::<f64>()
                    .sqrt()
            }
            BaseFunction::SchaffersF7 => {
                let z: Vec<f64> = self
                    .rotate(&self.shifted(x))
                    .iter()
                    .enumerate()
                    .map(|(i, v)| graded(d, i, 10.0, 0.5) * v)
                    .collect();
                let radii: Vec<f64> = if d == 1 {
                    vec![z[0].abs()]
                } else {
                    z.windows(2).map(|w| (w[0] * w[0] + w[1] * w[1]).sqrt()).collect()
                };
                let mean = radii
                    .iter()
                    .map(|&s| {
                        let root = s.sqrt();
                        let wave = (50.0 * s.powf(0.2)).sin();
                        root + root * wave * wave
                    })
                    .sum::<f64>()
                    / radii.len() as f64;
                mean * mean + 10.0 * boundary_penalty(x, DOMAIN_UPPER)
            }
            BaseFunction::Schwefel => {
                let peak = SCHWEFEL_ARGMAX * SCHWEFEL_ARGMAX.sqrt().sin();
                let mut wave = 0.0;
                let mut penalty = 0.0;
                for (xi, opt) in x.iter().zip(&self.x_opt) {
                    let u = SCHWEFEL_ARGMAX + 100.0 * (xi - opt);
                    wave += peak - u * u.abs().sqrt().sin();
                    let excess = u.abs() - 500.0;
                    if excess > 0.0 {
                        penalty += excess * excess;
                    }
                }
                wave / (100.0 * d as f64) + penalty / 100.0
            }
        }
    }
}

fn ellipsoid(z: &[f64]) -> f64 {
    let d = z.len();
    z.iter()
        .enumerate()
        .map(|(i, v)| graded(d, i, 10.0, 6.0) * v * v)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(id: u32, i: u32, d: usize) -> ProblemInstance {
        make_instance(FunctionId(id), i, d).unwrap()
    }

    #[test]
    fn same_key_same_instance() {
        let a = inst(1, 0, 2);
        let b = inst(1, 0, 2);
        assert_eq!(a, b);
        assert_eq!(
            serde_json::to_string(&a.metadata()).unwrap(),
            serde_json::to_string(&b.metadata()).unwrap()
        );
    }

    #[test]
    fn different_instances_differ() {
        assert_ne!(inst(1, 0, 2).x_opt(), inst(1, 1, 2).x_opt());
        assert_ne!(inst(10, 0, 3).rotation, inst(10, 1, 3).rotation);
    }

    #[test]
    fn optimum_evaluates_to_f_opt() {
        let a = inst(1, 0, 2);
        assert_eq!(a.evaluate(a.x_opt()).unwrap(), a.f_opt());
        let r = inst(3, 0, 2);
        assert_eq!(r.evaluate(r.x_opt()).unwrap(), r.f_opt());
    }

    #[test]
    fn sphere_offset_by_three_four() {
        let a = inst(1, 0, 2);
        let x = [a.x_opt()[0] + 3.0, a.x_opt()[1] + 4.0];
        let v = a.evaluate(&x).unwrap();
        assert!((v - (a.f_opt() + 25.0)).abs() < 1e-12, "{v}");
    }

    #[test]
    fn unknown_function_and_bad_dimension() {
        assert_eq!(
            make_instance(FunctionId(99), 0, 2),
            Err(SuiteError::UnknownFunction(99))
        );
        assert_eq!(make_instance(FunctionId(4), 0, 2), Err(SuiteError::UnknownFunction(4)));
        assert_eq!(make_instance(FunctionId(1), 0, 0), Err(SuiteError::InvalidDimension(0)));
    }

    #[test]
    fn dimension_mismatch() {
        let a = inst(1, 0, 3);
        assert_eq!(
            a.evaluate(&[0.0, 0.0]),
            Err(SuiteError::DimensionMismatch { expected: 3, got: 2 })
        );
    }

    #[test]
    fn precision_clamps() {
        let a = inst(1, 0, 2);
        assert_eq!(a.precision_of(a.f_opt()).value(), 0.0);
        assert_eq!(a.precision_of(a.f_opt() + 12.5).value(), 12.5);
        assert_eq!(a.precision_of(a.f_opt() - 1e-15).value(), 0.0);
    }

    #[test]
    fn f_opt_has_two_decimals() {
        for i in 0..20 {
            let f = inst(2, i, 3).f_opt();
            assert!((-100.0..=100.0).contains(&f));
            assert!(((f * 100.0).round() - f * 100.0).abs() < 1e-9);
        }
    }

    #[test]
    fn slope_optimum_on_corner() {
        for i in 0..5 {
            let a = inst(5, i, 4);
            assert!(a.x_opt().iter().all(|v| v.abs() == 5.0));
        }
    }

    #[test]
    fn rotation_is_orthogonal() {
        let a = inst(10, 3, 6);
        let r = a.rotation.as_ref().unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let dot: f64 = (0..6).map(|k| r[i * 6 + k] * r[j * 6 + k]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12);
            }
        }
    }
}
