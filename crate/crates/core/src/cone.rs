//! Open convex cones with monomial weights and the weighted measure of balls.
//!
//! A cone is `Σ = {x : x_i > 0 for every weighted axis i}` carrying the weight
//! `w(x) = ∏ x_i^{A_i}`. The weight is homogeneous of degree `α = Σ A_i`, so
//! balls scale like `μ(B_r ∩ Σ) = C_D r^D` with `D = d + α`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// One factor `x_axis^power` of a monomial weight. Axes are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisPower {
    pub axis: usize,
    pub power: f64,
}

/// Serializable description of a cone and its weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub d: usize,
    #[serde(default)]
    pub exponents: Vec<AxisPower>,
    /// `w ≡ 1` on all of `R^d` (`α = 0`). Only meant for cross-checks
    /// against the unweighted theory; reports flag it as an extension.
    #[serde(default)]
    pub extension_unweighted: bool,
}

impl ConeSpec {
    pub fn monomial(d: usize, exponents: &[(usize, f64)]) -> Self {
        ConeSpec {
            d,
            exponents: exponents.iter().map(|&(axis, power)| AxisPower { axis, power }).collect(),
            extension_unweighted: false,
        }
    }

    pub fn unweighted(d: usize) -> Self {
        ConeSpec { d, exponents: Vec::new(), extension_unweighted: true }
    }

    /// Names accepted by [`ConeSpec::builtin`].
    pub const BUILTIN_NAMES: [&'static str; 4] = ["halfplane-x1", "quadrant-x1x2", "plane", "space3"];

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "halfplane-x1" => Some(Self::monomial(2, &[(1, 1.0)])),
            "quadrant-x1x2" => Some(Self::monomial(2, &[(1, 1.0), (2, 1.0)])),
            "plane" => Some(Self::unweighted(2)),
            "space3" => Some(Self::unweighted(3)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::Validation(format!("dimension d = {} must be at least 2", self.d)));
        }
        let mut seen = vec![false; self.d];
        for e in &self.exponents {
            if e.axis == 0 || e.axis > self.d {
                return Err(Error::Validation(format!("axis {} outside 1..={}", e.axis, self.d)));
            }
            if seen[e.axis - 1] {
                return Err(Error::Validation(format!("axis {} listed twice", e.axis)));
            }
            seen[e.axis - 1] = true;
            if !(e.power > 0.0 && e.power.is_finite()) {
                return Err(Error::Validation(format!("power {} on axis {} must be positive", e.power, e.axis)));
            }
        }
        match (self.extension_unweighted, self.exponents.is_empty()) {
            (true, false) => Err(Error::Validation("extension_unweighted cones carry no exponents".into())),
            (false, true) => Err(Error::Validation(
                "a weighted cone needs at least one exponent (alpha > 0); set extension_unweighted for w = 1".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.exponents.iter().map(|e| e.power).sum()
    }

    fn is_constrained(&self, axis0: usize) -> bool {
        self.exponents.iter().any(|e| e.axis == axis0 + 1)
    }
}

/// A pointwise weight on a cone. Implemented by the monomial weights and by
/// [`PluginWeight`] for black-box experiments.
pub trait Weight: Sync {
    fn dim(&self) -> usize;
    fn alpha(&self) -> f64;
    /// 0-based axes on which the cone requires `x_i > 0`.
    fn constrained_axes(&self) -> Vec<usize>;
    fn eval(&self, x: &[f64]) -> Result<f64>;
}

/// A user-supplied weight, for testing hypotheses the monomial class satisfies.
pub struct PluginWeight {
    pub d: usize,
    pub alpha: f64,
    pub constrained: Vec<usize>,
    pub f: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl Weight for PluginWeight {
    fn dim(&self) -> usize {
        self.d
    }
    fn alpha(&self) -> f64 {
        self.alpha
    }
    fn constrained_axes(&self) -> Vec<usize> {
        self.constrained.clone()
    }
    fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok((self.f)(x))
    }
}

/// How to integrate the weight over the unit ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum QuadratureConfig {
    /// Tensor Gauss-Legendre rule in the angles; `order` nodes per angle.
    ProductRule { order: usize },
    /// Uniform sampling of the bounding orthant box.
    MonteCarlo { samples: u64, seed: u64, partitions: usize },
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig::ProductRule { order: 32 }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            QuadratureConfig::ProductRule { order } if order < 2 => {
                Err(Error::Validation(format!("product order {order} must be at least 2")))
            }
            QuadratureConfig::MonteCarlo { samples, .. } if samples < 1 => {
                Err(Error::Validation("monte-carlo needs at least one sample".into()))
            }
            QuadratureConfig::MonteCarlo { partitions, .. } if partitions < 1 => {
                Err(Error::Validation("monte-carlo needs at least one partition".into()))
            }
            _ => Ok(()),
        }
    }
}

/// A measured quantity with its error estimate and the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub value: f64,
    pub error_estimate: f64,
    pub config_echo: QuadratureConfig,
}

/// An immutable cone with its derived constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedCone {
    spec: ConeSpec,
    alpha: f64,
    big_d: f64,
    c_d: f64,
    c_d_error: f64,
}

impl<'de> Deserialize<'de> for WeightedCone {
    fn deserialize<De: serde::Deserializer<'de>>(de: De) -> std::result::Result<Self, De::Error> {
        #[derive(Deserialize)]
        struct Wire {
            spec: ConeSpec,
        }
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Either {
            Wrapped(Wire),
            Bare(ConeSpec),
        }
        let spec = match Either::deserialize(de)? {
            Either::Wrapped(w) => w.spec,
            Either::Bare(s) => s,
        };
        WeightedCone::new(spec).map_err(serde::de::Error::custom)
    }
}

impl WeightedCone {
    /// Validates the spec and computes `C_D` with the default product rule.
    pub fn new(spec: ConeSpec) -> Result<Self> {
        spec.validate()?;
        let est = unit_ball_measure(&spec, &QuadratureConfig::default())?;
        let alpha = spec.alpha();
        Ok(WeightedCone { big_d: spec.d as f64 + alpha, alpha, c_d: est.value, c_d_error: est.error_estimate, spec })
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let spec = ConeSpec::builtin(name).ok_or_else(|| {
            Error::Validation(format!("unknown cone '{name}', expected one of {:?}", ConeSpec::BUILTIN_NAMES))
        })?;
        Self::new(spec)
    }

    pub fn spec(&self) -> &ConeSpec {
        &self.spec
    }
    pub fn d(&self) -> usize {
        self.spec.d
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    /// Effective dimension `D = d + α`.
    pub fn big_d(&self) -> f64 {
        self.big_d
    }
    /// `C_D = μ(B_1 ∩ Σ)`.
    pub fn c_d(&self) -> f64 {
        self.c_d
    }
    pub fn c_d_error(&self) -> f64 {
        self.c_d_error
    }
    pub fn is_extension(&self) -> bool {
        self.spec.extension_unweighted
    }

    /// `μ(B_r ∩ Σ) = C_D r^D`.
    pub fn ball_measure(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::Domain(format!("radius {r} must be nonnegative")));
        }
        Ok(self.c_d * r.powf(self.big_d))
    }

    /// Measure coordinate `t = C_D |x|^D` of a radius.
    pub fn measure_coordinate(&self, r: f64) -> f64 {
        self.c_d * r.powf(self.big_d)
    }

    /// Radius whose ball has measure `t`.
    pub fn radius_of_measure(&self, t: f64) -> f64 {
        (t / self.c_d).powf(1.0 / self.big_d)
    }

    pub fn weight_eval(&self, x: &[f64]) -> Result<f64> {
        Weight::eval(self, x)
    }

    /// True when every weighted coordinate of `x` is nonnegative.
    pub fn contains_closure(&self, x: &[f64]) -> bool {
        x.len() == self.spec.d && self.spec.exponents.iter().all(|e| x[e.axis - 1] >= 0.0)
    }
}

impl Weight for WeightedCone {
    fn dim(&self) -> usize {
        self.spec.d
    }
    fn alpha(&self) -> f64 {
        self.alpha
    }
    fn constrained_axes(&self) -> Vec<usize> {
        self.spec.exponents.iter().map(|e| e.axis - 1).collect()
    }
    fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.spec.d {
            return Err(Error::Domain(format!("point has {} coordinates, cone has d = {}", x.len(), self.spec.d)));
        }
        if !self.contains_closure(x) {
            return Err(Error::Domain(format!("point {x:?} lies outside the closed cone")));
        }
        Ok(monomial(&self.spec, x))
    }
}

fn monomial(spec: &ConeSpec, x: &[f64]) -> f64 {
    spec.exponents.iter().map(|e| x[e.axis - 1].powf(e.power)).product()
}

/// `C_D = ∫_{B_1 ∩ Σ} w(x) dx` with an error estimate.
///
/// The product rule writes the integral as `(1/D) ∫_{S^{d-1} ∩ Σ} w(ω) dσ`
/// in hyperspherical angles, where the cone becomes an angular box. The error
/// estimate is the difference between orders `n` and `2n`.
pub fn unit_ball_measure(spec: &ConeSpec, config: &QuadratureConfig) -> Result<MeasureEstimate> {
    spec.validate()?;
    config.validate()?;
    let (value, error_estimate) = match *config {
        QuadratureConfig::ProductRule { order } => {
            let coarse = angular_product_rule(spec, order);
            let fine = angular_product_rule(spec, 2 * order);
            (fine, (fine - coarse).abs())
        }
        QuadratureConfig::MonteCarlo { samples, seed, partitions } => monte_carlo_ball(spec, samples, seed, partitions),
    };
    if !(value > 0.0 && value.is_finite()) || error_estimate > 0.1 * value {
        return Err(Error::Numerical(format!(
            "unit-ball quadrature did not converge: value {value:e}, error estimate {error_estimate:e}"
        )));
    }
    Ok(MeasureEstimate { value, error_estimate, config_echo: *config })
}

/// Angular box `[lo, hi]` for each of the `d - 1` hyperspherical angles.
fn angular_box(spec: &ConeSpec) -> Vec<(f64, f64)> {
    let d = spec.d;
    let mut boxes = Vec::with_capacity(d - 1);
    for k in 0..d.saturating_sub(2) {
        boxes.push(if spec.is_constrained(k) { (0.0, PI / 2.0) } else { (0.0, PI) });
    }
    let last = match (spec.is_constrained(d - 2), spec.is_constrained(d - 1)) {
        (true, true) => (0.0, PI / 2.0),
        (true, false) => (-PI / 2.0, PI / 2.0),
        (false, true) => (0.0, PI),
        (false, false) => (-PI, PI),
    };
    boxes.push(last);
    boxes
}

fn angles_to_point(angles: &[f64], x: &mut [f64]) {
    let d = x.len();
    let mut sin_prod = 1.0;
    for k in 0..d - 1 {
        x[k] = sin_prod * angles[k].cos();
        sin_prod *= angles[k].sin();
    }
    x[d - 1] = sin_prod;
}

fn angular_product_rule(spec: &ConeSpec, order: usize) -> f64 {
    let d = spec.d;
    let boxes = angular_box(spec);
    // Smoothstep substitution on every angle flattens the algebraic zeros of
    // cos^A and sin^A at the box faces.
    let rule: Vec<(f64, f64)> = gauss_legendre(order)
        .into_iter()
        .map(|(x, w)| {
            let u = 0.5 * (x + 1.0);
            (u * u * (3.0 - 2.0 * u), 0.5 * w * 6.0 * u * (1.0 - u))
        })
        .collect();
    let n = rule.len();
    let dims = d - 1;
    let mut idx = vec![0usize; dims];
    let mut angles = vec![0.0; dims];
    let mut x = vec![0.0; d];
    let mut total = 0.0;
    'outer: loop {
        let mut weight = 1.0;
        for k in 0..dims {
            let (lo, hi) = boxes[k];
            let (s, w) = rule[idx[k]];
            angles[k] = lo + (hi - lo) * s;
            weight *= (hi - lo) * w;
        }
        let mut jac = 1.0;
        for (k, a) in angles.iter().enumerate().take(dims.saturating_sub(1)) {
            jac *= a.sin().powi((d - 2 - k) as i32);
        }
        angles_to_point(&angles, &mut x);
        for e in &spec.exponents {
            x[e.axis - 1] = x[e.axis - 1].max(0.0);
        }
        total += weight * jac * monomial(spec, &x);
        for i in idx.iter_mut() {
            *i += 1;
            if *i < n {
                continue 'outer;
            }
            *i = 0;
        }
        break;
    }
    total / (d as f64 + spec.alpha())
}

fn monte_carlo_ball(spec: &ConeSpec, samples: u64, seed: u64, partitions: usize) -> (f64, f64) {
    let d = spec.d;
    let lows: Vec<f64> = (0..d).map(|k| if spec.is_constrained(k) { 0.0 } else { -1.0 }).collect();
    let volume: f64 = lows.iter().map(|lo| 1.0 - lo).product();
    let parts = partitions as u64;
    let sums: Vec<(f64, f64)> = (0..parts)
        .into_par_iter()
        .map(|part| {
            let count = samples / parts + u64::from(part < samples % parts);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(part);
            let mut x = vec![0.0; d];
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                for (xi, lo) in x.iter_mut().zip(&lows) {
                    *xi = rng.random_range(*lo..1.0);
                }
                if x.iter().map(|v| v * v).sum::<f64>() < 1.0 {
                    let w = monomial(spec, &x);
                    s1 += w;
                    s2 += w * w;
                }
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = sums.iter().fold((0.0, 0.0), |acc, s| (acc.0 + s.0, acc.1 + s.1));
    let n = samples as f64;
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    (volume * mean, volume * (var / n).sqrt())
}

/// Outcome of [`concavity_probe`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub trials: usize,
    pub violations: usize,
    /// Largest amount by which the midpoint value fell short.
    pub worst_gap: f64,
    pub pass: bool,
}

/// Statistical midpoint-concavity test of `w^{1/α}` on random segments of the cone.
pub fn concavity_probe(weight: &dyn Weight, trials: usize, seed: u64) -> Result<ConcavityReport> {
    if trials < 1 {
        return Err(Error::Validation("concavity probe needs at least one trial".into()));
    }
    let alpha = weight.alpha();
    if alpha <= 0.0 {
        // w ≡ 1 in extension mode; w^{1/α} is not defined and nothing is tested.
        return Ok(ConcavityReport { trials, violations: 0, worst_gap: 0.0, pass: true });
    }
    let d = weight.dim();
    let constrained = weight.constrained_axes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..d)
            .map(|k| if constrained.contains(&k) { rng.random_range(0.0..1.0) } else { rng.random_range(-1.0..1.0) })
            .collect()
    };
    let root = |x: &[f64]| -> Result<f64> { Ok(weight.eval(x)?.max(0.0).powf(1.0 / alpha)) };
    let (mut violations, mut worst_gap) = (0usize, 0.0f64);
    for trial in 0..trials {
        let x = sample(&mut rng);
        // The first of a single-trial run is the degenerate segment x = y.
        let y = if trials == 1 && trial == 0 { x.clone() } else { sample(&mut rng) };
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        let gap = 0.5 * (root(&x)? + root(&y)?) - root(&mid)?;
        if gap > 1e-12 {
            violations += 1;
        }
        worst_gap = worst_gap.max(gap);
    }
    Ok(ConcavityReport { trials, violations, worst_gap: worst_gap.max(0.0), pass: violations == 0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn halfplane() -> WeightedCone {
        WeightedCone::builtin("halfplane-x1").unwrap()
    }

    #[test]
    fn weight_examples() {
        let c = halfplane();
        assert_eq!(c.weight_eval(&[2.0, 5.0]).unwrap(), 2.0);
        assert_eq!(c.weight_eval(&[6.0, 15.0]).unwrap(), 3.0 * c.weight_eval(&[2.0, 5.0]).unwrap());
        let q = WeightedCone::builtin("quadrant-x1x2").unwrap();
        assert_eq!(q.weight_eval(&[3.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(q.weight_eval(&[-1.0, 1.0]), Err(Error::Domain(_))));
        assert!(matches!(q.weight_eval(&[1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn constructed_constants() {
        let c = halfplane();
        assert_eq!(c.alpha(), 1.0);
        assert_eq!(c.big_d(), 3.0);
        assert!((c.c_d() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(c.ball_measure(0.0).unwrap(), 0.0);
        assert_eq!(c.ball_measure(1.0).unwrap(), c.c_d());
        assert!((c.ball_measure(2.0).unwrap() - 16.0 / 3.0).abs() < 1e-11);
        assert!(matches!(c.ball_measure(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn spec_validation() {
        assert!(ConeSpec::monomial(1, &[(1, 1.0)]).validate().is_err());
        assert!(ConeSpec::monomial(2, &[(3, 1.0)]).validate().is_err());
        assert!(ConeSpec::monomial(2, &[(1, 1.0), (1, 2.0)]).validate().is_err());
        assert!(ConeSpec::monomial(2, &[(1, -1.0)]).validate().is_err());
        assert!(ConeSpec { d: 2, exponents: vec![], extension_unweighted: false }.validate().is_err());
        assert!(ConeSpec::unweighted(2).validate().is_ok());
        assert!(QuadratureConfig::ProductRule { order: 1 }.validate().is_err());
        assert!(QuadratureConfig::MonteCarlo { samples: 0, seed: 0, partitions: 1 }.validate().is_err());
    }

    #[test]
    fn non_integer_powers_and_higher_dimension() {
        // d = 3, w = x1^{1/2}: C_D = (1/D) ∫_{S^2, x1>0} x1^{1/2} dσ = (1/D) 2π ∫_0^1 s^{1/2} ds.
        let spec = ConeSpec::monomial(3, &[(1, 0.5)]);
        let est = unit_ball_measure(&spec, &QuadratureConfig::ProductRule { order: 48 }).unwrap();
        let exact = 2.0 * PI * (2.0 / 3.0) / 3.5;
        assert!((est.value - exact).abs() < 1e-6 * exact, "{} vs {exact}", est.value);
        // Unit ball volume in R^3.
        let ball = unit_ball_measure(&ConeSpec::unweighted(3), &QuadratureConfig::default()).unwrap();
        assert!((ball.value - 4.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn concavity_probe_cases() {
        let c = halfplane();
        assert!(concavity_probe(&c, 2000, 7).unwrap().pass);
        assert!(concavity_probe(&c, 1, 7).unwrap().pass);
        let bad =
            PluginWeight { d: 2, alpha: 2.0, constrained: vec![0, 1], f: Box::new(|x| x[0] * x[0] + x[1] * x[1]) };
        let rep = concavity_probe(&bad, 2000, 7).unwrap();
        assert!(!rep.pass && rep.violations > 0);
    }

    #[test]
    fn cone_json_round_trip() {
        let c = halfplane();
        let text = serde_json::to_string(c.spec()).unwrap();
        let back: WeightedCone = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        let wrapped = serde_json::to_string(&c).unwrap();
        let back: WeightedCone = serde_json::from_str(&wrapped).unwrap();
        assert_eq!(back, c);
    }
}
