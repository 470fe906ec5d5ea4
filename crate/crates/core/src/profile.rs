//! Radially nonincreasing functions stored as exact laws in the measure coordinate.
//!
//! A profile `φ` represents `u(x) = φ(C_D |x|^D)`; because `μ(B_r) = C_D r^D`,
//! `φ` is also the decreasing rearrangement of `u` with respect to the cone
//! measure.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cone::{ConeSpec, WeightedCone};
use crate::error::{Error, Result};
use crate::law::{Law, Term};
use crate::levels::{Piece, PiecewiseFn};

/// `law` on `[t0, t1]` in measure units.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub t0: f64,
    pub t1: f64,
    pub law: Law,
}

const CONTINUITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct RadialProfile {
    cone: Arc<WeightedCone>,
    segments: Vec<Segment>,
}

impl PartialEq for RadialProfile {
    fn eq(&self, other: &Self) -> bool {
        self.cone.spec() == other.cone.spec() && self.segments == other.segments
    }
}

impl RadialProfile {
    /// Validates contiguity from `t = 0`, continuity, monotonicity and vanishing at the support end.
    pub fn new(cone: Arc<WeightedCone>, segments: Vec<Segment>) -> Result<Self> {
        if let Some(first) = segments.first() {
            if first.t0 != 0.0 {
                return Err(Error::Validation(format!("first segment must start at t = 0, got {}", first.t0)));
            }
        }
        let mut scale: f64 = 0.0;
        for s in &segments {
            if !(s.t1 > s.t0) || !s.t1.is_finite() || s.t0 < 0.0 {
                return Err(Error::Validation(format!("invalid segment [{}, {}]", s.t0, s.t1)));
            }
            for t in [s.t0, s.t1] {
                let v = s.law.eval(t);
                if v.is_finite() {
                    scale = scale.max(v.abs());
                } else if !(t == 0.0 && v == f64::INFINITY) {
                    return Err(Error::Validation(format!("profile value {v} at t = {t}")));
                }
            }
        }
        let tol = CONTINUITY_TOL * scale.max(f64::MIN_POSITIVE);
        for (i, s) in segments.iter().enumerate() {
            if let Some(next) = segments.get(i + 1) {
                if next.t0 != s.t1 {
                    return Err(Error::Validation(format!("gap between segments at t = {}", s.t1)));
                }
                let jump = (s.law.eval(s.t1) - next.law.eval(s.t1)).abs();
                if jump > tol {
                    return Err(Error::Validation(format!("discontinuity of size {jump:e} at t = {}", s.t1)));
                }
            } else if s.law.eval(s.t1).abs() > tol {
                return Err(Error::Validation(format!("profile does not vanish at its support end {}", s.t1)));
            }
            if !law_nonincreasing(&s.law, s.t0, s.t1, tol) {
                return Err(Error::Validation(format!("profile increases on [{}, {}]", s.t0, s.t1)));
            }
        }
        Ok(RadialProfile { cone, segments })
    }

    /// Piecewise-affine profile through `knots`, constant to the left of the first one.
    pub fn from_knots(cone: Arc<WeightedCone>, knots: &[(f64, f64)]) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::Validation("at least one knot is required".into()));
        }
        for &(t, v) in knots {
            if t < 0.0 || !t.is_finite() {
                return Err(Error::Domain(format!("knot position {t} is outside [0, ∞)")));
            }
            if !v.is_finite() {
                return Err(Error::Validation(format!("knot value {v} is not finite")));
            }
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Validation(format!("knot positions must increase: {} then {}", w[0].0, w[1].0)));
            }
            if w[1].1 > w[0].1 {
                return Err(Error::Validation(format!(
                    "knot values must not increase: {} at {} then {} at {}",
                    w[0].1, w[0].0, w[1].1, w[1].0
                )));
            }
        }
        let last = knots[knots.len() - 1];
        if last.1 != 0.0 {
            return Err(Error::Validation(format!("last knot value must be 0, got {}", last.1)));
        }
        let mut segments = Vec::with_capacity(knots.len());
        if knots[0].0 > 0.0 {
            segments.push(Segment { t0: 0.0, t1: knots[0].0, law: Law::constant(knots[0].1) });
        }
        for w in knots.windows(2) {
            let ((t0, v0), (t1, v1)) = (w[0], w[1]);
            let law = if v0 == v1 {
                Law::constant(v0)
            } else {
                let slope = (v1 - v0) / (t1 - t0);
                Law::affine(v0 - slope * t0, slope)
            };
            segments.push(Segment { t0, t1, law });
        }
        RadialProfile::new(cone, segments)
    }

    pub fn zero(cone: Arc<WeightedCone>) -> Self {
        RadialProfile { cone, segments: Vec::new() }
    }

    pub fn cone(&self) -> &Arc<WeightedCone> {
        &self.cone
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn support_end(&self) -> f64 {
        self.segments.last().map(|s| s.t1).unwrap_or(0.0)
    }

    /// `true` when `φ(t) → ∞` as `t → 0`.
    pub fn has_unbounded_head(&self) -> bool {
        self.segments.first().map(|s| !s.law.eval(0.0).is_finite()).unwrap_or(false)
    }

    pub fn is_zero(&self) -> bool {
        self.segments.iter().all(|s| s.law.is_constant() && s.law.offset == 0.0)
    }

    pub fn value(&self, t: f64) -> f64 {
        if t >= self.support_end() {
            return 0.0;
        }
        let idx = self.segments.partition_point(|s| s.t1 < t).min(self.segments.len() - 1);
        self.segments[idx].law.eval(t.max(0.0))
    }

    /// `u(x) = φ(C_D |x|^D)`.
    pub fn realize(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.cone.d() {
            return Err(Error::Domain(format!("point has dimension {}, cone has {}", x.len(), self.cone.d())));
        }
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(self.value(self.cone.measure_coordinate(r)))
    }

    pub fn to_piecewise(&self) -> PiecewiseFn {
        PiecewiseFn::new(self.segments.iter().map(|s| Piece { t0: s.t0, t1: s.t1, law: s.law.clone() }).collect())
    }

    /// `ψ(t) = D C_D^{1/D} t^{(D-1)/D} (-φ'(t))`, the density of `|∇u|` on level sets.
    pub fn gradient_density(&self) -> Result<GradientDensity> {
        if self.has_unbounded_head() {
            return Err(Error::Precondition(
                "profile is unbounded at the origin; truncate it (head cutoff or a positive Alvino eps) first".into(),
            ));
        }
        let big_d = self.cone.big_d();
        let factor = big_d * self.cone.c_d().powf(1.0 / big_d);
        let segments = self
            .segments
            .iter()
            .filter(|s| !s.law.is_constant())
            .map(|s| {
                let terms = s
                    .law
                    .terms
                    .iter()
                    .map(|t| Term { coeff: -factor * t.coeff * t.exponent, exponent: t.exponent - 1.0 / big_d })
                    .collect();
                Segment { t0: s.t0, t1: s.t1, law: Law { offset: 0.0, terms }.normalized() }
            })
            .filter(|s| !(s.law.is_constant() && s.law.offset == 0.0))
            .collect();
        Ok(GradientDensity { cone: self.cone.clone(), segments })
    }

    /// The profile of `u_κ(x) = u(κx)`, i.e. `t ↦ φ(κ^D t)`.
    pub fn scale(&self, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::Domain(format!("scaling factor must be positive, got {kappa}")));
        }
        let k = kappa.powf(self.cone.big_d());
        let segments =
            self.segments.iter().map(|s| Segment { t0: s.t0 / k, t1: s.t1 / k, law: s.law.compose_scale(k) }).collect();
        Ok(RadialProfile { cone: self.cone.clone(), segments })
    }

    /// `a · φ` for `a >= 0`.
    pub fn scale_amplitude(&self, a: f64) -> Result<Self> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::Domain(format!("amplitude must be nonnegative, got {a}")));
        }
        let segments = self.segments.iter().map(|s| Segment { t0: s.t0, t1: s.t1, law: s.law.scaled(a) }).collect();
        Ok(RadialProfile { cone: self.cone.clone(), segments })
    }

    /// Profile of `∫_t^∞ (-φ')(s) η_n(s) ds`, where `η_n` ramps linearly from
    /// 0 at `1/(n+1)` to 1 at `1/n`. The result is flat on `(0, 1/(n+1)]`.
    pub fn head_cutoff(&self, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("cutoff index must be positive".into()));
        }
        if self.has_unbounded_head() {
            return Err(Error::Precondition("head cutoff needs a bounded profile".into()));
        }
        let (a, b) = (1.0 / (n as f64 + 1.0), 1.0 / n as f64);
        let flat_on_head = self.segments.iter().filter(|s| s.t0 < b).all(|s| s.law.is_constant());
        if flat_on_head {
            return Ok(self.clone());
        }
        let end = self.support_end();
        let top = b.min(end);
        let mut right: Vec<Segment> = Vec::new();
        for s in &self.segments {
            if s.t1 > b {
                right.push(Segment { t0: s.t0.max(b), t1: s.t1, law: s.law.clone() });
            }
        }
        let mut middle: Vec<Segment> = Vec::new();
        let mut upper = if b < end { self.value(b) } else { 0.0 };
        let ramp = b - a;
        for s in self.segments.iter().rev() {
            let (x, y) = (s.t0.max(a), s.t1.min(top));
            if !(y > x) {
                continue;
            }
            let law = if s.law.is_constant() {
                Law::constant(upper)
            } else {
                let mut g_terms = Vec::with_capacity(2 * s.law.terms.len());
                for t in &s.law.terms {
                    if (t.exponent + 1.0).abs() < 1e-14 {
                        return Err(Error::Precondition(
                            "head cutoff of a t^-1 segment needs a logarithmic law".into(),
                        ));
                    }
                    g_terms.push(Term {
                        coeff: -t.coeff * t.exponent / (t.exponent + 1.0) / ramp,
                        exponent: t.exponent + 1.0,
                    });
                    g_terms.push(Term { coeff: a * t.coeff / ramp, exponent: t.exponent });
                }
                let g = Law { offset: 0.0, terms: g_terms }.normalized();
                Law::constant(upper + g.eval(y)).add(&g.scaled(-1.0))
            };
            upper = law.eval(x);
            middle.push(Segment { t0: x, t1: y, law });
        }
        middle.reverse();
        let mut segments = vec![Segment { t0: 0.0, t1: a.min(end), law: Law::constant(upper) }];
        segments.extend(middle);
        segments.extend(right);
        segments.retain(|s| s.t1 > s.t0);
        RadialProfile::new(self.cone.clone(), segments)
    }

    /// Profile restricted to the window `(lo, hi)` and rearranged, `s ↦ φ(s + lo)` on `(0, hi - lo)`.
    pub fn shifted_window(&self, lo: f64, hi: f64) -> PiecewiseFn {
        let hi = hi.min(self.support_end());
        let pieces = self
            .segments
            .iter()
            .filter(|s| s.t1 > lo && s.t0 < hi)
            .map(|s| Piece { t0: s.t0.max(lo), t1: s.t1.min(hi), law: s.law.clone() })
            .collect();
        PiecewiseFn::new(pieces)
    }
}

fn law_nonincreasing(law: &Law, t0: f64, t1: f64, tol: f64) -> bool {
    if law.is_constant() {
        return true;
    }
    if let [t] = law.terms.as_slice() {
        return t.coeff * t.exponent <= 0.0;
    }
    let lo = if t0 > 0.0 { t0 } else { t1 * 1e-12 };
    let n = 32;
    let mut prev = law.eval(lo);
    for i in 1..=n {
        let t = lo * (t1 / lo).powf(i as f64 / n as f64);
        let v = law.eval(t);
        if v > prev + tol {
            return false;
        }
        prev = prev.min(v);
    }
    true
}

/// `|∇u|` on level sets: pure power-sum segments of `ψ`.
#[derive(Debug, Clone)]
pub struct GradientDensity {
    cone: Arc<WeightedCone>,
    segments: Vec<Segment>,
}

impl GradientDensity {
    pub fn cone(&self) -> &Arc<WeightedCone> {
        &self.cone
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn value(&self, t: f64) -> f64 {
        self.segments.iter().find(|s| t >= s.t0 && t <= s.t1).map(|s| s.law.eval(t)).unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn to_piecewise(&self) -> PiecewiseFn {
        PiecewiseFn::new(self.segments.iter().map(|s| Piece { t0: s.t0, t1: s.t1, law: s.law.clone() }).collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileJson {
    pub segments: Vec<SegmentJson>,
    pub cone: ConeSpec,
}

/// Wire form of one segment: `law` is `affine` `[a, b]`, `power` `[c, e]` or
/// `[c, e, k]`, or `power-sum` `[k, c1, e1, c2, e2, ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentJson {
    pub t0: f64,
    pub t1: f64,
    pub law: String,
    pub params: Vec<f64>,
}

fn encode_law(law: &Law) -> (String, Vec<f64>) {
    match law.terms.as_slice() {
        [] => ("affine".into(), vec![law.offset, 0.0]),
        [t] if t.exponent == 1.0 => ("affine".into(), vec![law.offset, t.coeff]),
        [t] if law.offset == 0.0 => ("power".into(), vec![t.coeff, t.exponent]),
        [t] => ("power".into(), vec![t.coeff, t.exponent, law.offset]),
        terms => {
            let mut params = vec![law.offset];
            for t in terms {
                params.push(t.coeff);
                params.push(t.exponent);
            }
            ("power-sum".into(), params)
        }
    }
}

fn decode_law(kind: &str, params: &[f64]) -> Result<Law> {
    let bad = || Error::Validation(format!("law '{kind}' cannot take parameters {params:?}"));
    match kind {
        "affine" => match params {
            [a, b] => Ok(Law::affine(*a, *b)),
            _ => Err(bad()),
        },
        "power" => match params {
            [c, e] => Ok(Law::power(*c, *e, 0.0)),
            [c, e, k] => Ok(Law::power(*c, *e, *k)),
            _ => Err(bad()),
        },
        "power-sum" => {
            if params.is_empty() || params.len().is_multiple_of(2) {
                return Err(bad());
            }
            let terms = params[1..].chunks(2).map(|c| Term { coeff: c[0], exponent: c[1] }).collect();
            Ok(Law { offset: params[0], terms }.normalized())
        }
        other => Err(Error::Validation(format!("unknown segment law '{other}'"))),
    }
}

impl RadialProfile {
    pub fn to_json(&self) -> ProfileJson {
        ProfileJson {
            segments: self
                .segments
                .iter()
                .map(|s| {
                    let (law, params) = encode_law(&s.law);
                    SegmentJson { t0: s.t0, t1: s.t1, law, params }
                })
                .collect(),
            cone: self.cone.spec().clone(),
        }
    }

    /// Rebuilds a profile; the cone is taken from `cone` when given, else built from the JSON spec.
    pub fn from_json(json: &ProfileJson, cone: Option<Arc<WeightedCone>>) -> Result<Self> {
        let cone = match cone {
            Some(c) => {
                if c.spec() != &json.cone {
                    return Err(Error::Validation("profile JSON belongs to a different cone".into()));
                }
                c
            }
            None => Arc::new(WeightedCone::new(json.cone.clone())?),
        };
        let segments = json
            .segments
            .iter()
            .map(|s| Ok(Segment { t0: s.t0, t1: s.t1, law: decode_law(&s.law, &s.params)? }))
            .collect::<Result<Vec<_>>>()?;
        RadialProfile::new(cone, segments)
    }
}

impl Serialize for RadialProfile {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RadialProfile {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let json = ProfileJson::deserialize(deserializer)?;
        RadialProfile::from_json(&json, None).map_err(serde::de::Error::custom)
    }
}

/// `min(eps^{-1/p*}, t^{-1/p*}) - t_max^{-1/p*}`, clipped at zero.
pub fn alvino_profile(cone: Arc<WeightedCone>, p_star: f64, eps: f64, t_max: f64) -> Result<RadialProfile> {
    if !(p_star > 0.0 && p_star.is_finite()) {
        return Err(Error::Domain(format!("exponent p* must be positive, got {p_star}")));
    }
    if !(eps > 0.0 && eps < t_max && t_max.is_finite()) {
        return Err(Error::Domain(format!("Alvino profile needs 0 < eps < t_max, got eps = {eps}, t_max = {t_max}")));
    }
    let e = -1.0 / p_star;
    let floor = t_max.powf(e);
    let segments = vec![
        Segment { t0: 0.0, t1: eps, law: Law::constant(eps.powf(e) - floor) },
        Segment { t0: eps, t1: t_max, law: Law::power(1.0, e, -floor) },
    ];
    RadialProfile::new(cone, segments)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn halfplane() -> Arc<WeightedCone> {
        Arc::new(WeightedCone::builtin("halfplane-x1").unwrap())
    }

    #[test]
    fn knots() {
        let cone = halfplane();
        let p = RadialProfile::from_knots(cone.clone(), &[(1.0, 5.0), (2.0, 0.0)]).unwrap();
        assert_eq!(p.value(0.3), 5.0);
        assert_eq!(p.value(1.5), 2.5);
        assert_eq!(p.value(3.0), 0.0);
        assert!(matches!(
            RadialProfile::from_knots(cone.clone(), &[(1.0, 5.0), (2.0, 7.0)]),
            Err(Error::Validation(_))
        ));
        let p = RadialProfile::from_knots(cone.clone(), &[(0.5, 1.0), (1.0, 1.0), (2.0, 0.0)]).unwrap();
        assert_eq!(p.value(0.75), 1.0);
        assert!(matches!(RadialProfile::from_knots(cone, &[(-1.0, 1.0), (2.0, 0.0)]), Err(Error::Domain(_))));
    }

    #[test]
    fn alvino_shape() {
        let cone = halfplane();
        let t_max: f64 = 50.0;
        let p = alvino_profile(cone.clone(), 1.5, 1.0, t_max).unwrap();
        assert!((p.value(1.0) - (1.0 - t_max.powf(-2.0 / 3.0))).abs() < 1e-15);
        let p = alvino_profile(cone.clone(), 1.5, 25.0, t_max).unwrap();
        assert!(p.segments()[0].law.is_constant() && p.segments().len() == 2);
        assert!(matches!(alvino_profile(cone, 1.5, 2.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn gradient_density_formulas() {
        let cone = halfplane();
        let (big_d, c) = (cone.big_d(), cone.c_d());
        let factor = big_d * c.powf(1.0 / big_d);
        let p = RadialProfile::from_knots(cone.clone(), &[(1.0, 2.0), (3.0, 0.0)]).unwrap();
        let g = p.gradient_density().unwrap();
        let t: f64 = 2.0;
        assert!((g.value(t) - factor * 1.0 * t.powf((big_d - 1.0) / big_d)).abs() < 1e-14);
        assert_eq!(g.value(0.5), 0.0);

        // Alvino arc: ψ = (D C^{1/D} / p*) t^{-1/p} with 1/p = 1/p* + 1/D.
        let p_star = 3.0;
        let inv_p = 1.0 / p_star + 1.0 / big_d;
        let alv = alvino_profile(cone.clone(), p_star, 1e-3, 10.0).unwrap();
        let g = alv.gradient_density().unwrap();
        for i in 0..10 {
            let t = 1e-3 * 10f64.powf(0.4 * i as f64 + 0.1);
            let formula = factor / p_star * t.powf(-inv_p);
            assert!((g.value(t) - formula).abs() < 1e-12 * formula);
            let h = t * 1e-5;
            let fd = -(alv.value(t + h) - alv.value(t - h)) / (2.0 * h);
            let fd_psi = factor * t.powf((big_d - 1.0) / big_d) * fd;
            assert!((fd_psi - formula).abs() < 1e-8 * formula, "t = {t}");
        }

        let flat = RadialProfile::from_knots(cone, &[(1.0, 0.0)]).unwrap();
        assert!(flat.gradient_density().unwrap().is_zero());
    }

    #[test]
    fn unbounded_head_is_barred() {
        let seg = vec![Segment { t0: 0.0, t1: 1.0, law: Law::power(1.0, -0.5, -1.0) }];
        let p = RadialProfile::new(halfplane(), seg).unwrap();
        assert!(p.has_unbounded_head());
        assert!(matches!(p.gradient_density(), Err(Error::Precondition(_))));
    }

    #[test]
    fn scaling() {
        let cone = halfplane();
        let p = alvino_profile(cone.clone(), 3.0, 0.01, 4.0).unwrap();
        assert_eq!(p.scale(1.0).unwrap(), p);
        let s = p.scale(2.0).unwrap();
        assert!((s.support_end() - 4.0 / 2f64.powf(cone.big_d())).abs() < 1e-15);
        let (g, gs) = (p.gradient_density().unwrap(), s.gradient_density().unwrap());
        let k = 2f64.powf(cone.big_d());
        for t in [0.001, 0.01, 0.1, 0.4] {
            let expect = 2.0 * g.value(k * t);
            assert!((gs.value(t) - expect).abs() <= 1e-13 * expect.abs().max(1e-300));
        }
    }

    #[test]
    fn cutoff() {
        let cone = halfplane();
        let flat_head = RadialProfile::from_knots(cone.clone(), &[(1.0, 1.0), (2.0, 0.0)]).unwrap();
        assert_eq!(flat_head.head_cutoff(1).unwrap(), flat_head);
        let alv = alvino_profile(cone.clone(), 3.0, 0.5, 3.0).unwrap();
        assert_eq!(alv.head_cutoff(3).unwrap(), alv);

        let tent = RadialProfile::from_knots(cone.clone(), &[(0.0, 2.0), (2.0, 0.0)]).unwrap();
        let cut = tent.head_cutoff(2).unwrap();
        let g = cut.gradient_density().unwrap();
        assert!(g.segments().iter().all(|s| s.t0 >= 1.0 / 3.0));
        // Between 1/3 and 1/2 the slope ramps: u' = -(t - 1/3) / (1/6).
        let t = 0.4;
        let exact = |t: f64| 1.5 + ((0.5 - 1.0 / 3.0f64).powi(2) - (t - 1.0 / 3.0f64).powi(2)) / (2.0 / 6.0);
        assert!((cut.value(t) - exact(t)).abs() < 1e-12);
        assert!((cut.value(0.1) - exact(1.0 / 3.0)).abs() < 1e-12);
        assert_eq!(cut.value(1.0), tent.value(1.0));
    }

    #[test]
    fn json_round_trip() {
        let cone = halfplane();
        let p = alvino_profile(cone.clone(), 3.0, 1e-6, 2.0).unwrap().head_cutoff(4).unwrap();
        let text = serde_json::to_string(&p).unwrap();
        let back: RadialProfile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
        let tent = RadialProfile::from_knots(cone, &[(1.0, 2.0), (2.0, 0.0)]).unwrap();
        let v = serde_json::to_value(&tent).unwrap();
        assert_eq!(v["segments"][1]["law"], "affine");
    }
}
