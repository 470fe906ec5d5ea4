//! Lorentz norms `‖·‖_{p,q}` with respect to the cone measure.
//!
//! Two independent evaluation paths exist: the rearranged form
//! `(∫ t^{q/p-1} f*(t)^q dt)^{1/q}`, exact on step and segment laws, and the
//! distributional form `(p ∫ τ^{q-1} λ(τ)^{q/p} dτ)^{1/q}` by quadrature over
//! levels. They are cross-checked in the test suite.

use serde::{Deserialize, Serialize};

use crate::cone::WeightedCone;
use crate::error::{Error, Result};
use crate::law::{weighted_power_integral, Law};
use crate::levels::{Piece, PiecewiseFn};
use crate::profile::{GradientDensity, RadialProfile};
use crate::quadrature::{integrate_auto, power_integral};
use crate::rearrange::{SampledField, StepFunction1D};

/// Exponents `1 <= q <= p < ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzParams {
    pub p: f64,
    pub q: f64,
}

impl LorentzParams {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(q >= 1.0 && q <= p && p.is_finite()) {
            return Err(Error::Domain(format!("Lorentz exponents need 1 <= q <= p < ∞, got p = {p}, q = {q}")));
        }
        Ok(LorentzParams { p, q })
    }

    /// Hölder conjugate of `q`; infinite for `q = 1`.
    pub fn q_prime(&self) -> f64 {
        conjugate(self.q)
    }

    /// Binds to a cone, deriving `p* = D p / (D - p)`.
    pub fn bind(&self, cone: &WeightedCone) -> Result<BoundParams> {
        let big_d = cone.big_d();
        if !(self.p < big_d) {
            return Err(Error::Domain(format!(
                "p = {} is not below the homogeneous dimension D = {big_d}; no embedding into L^(p*,q)",
                self.p
            )));
        }
        let p_star = big_d * self.p / (big_d - self.p);
        let residual = (1.0 / self.p - 1.0 / p_star - 1.0 / big_d).abs();
        if residual > 1e-15 * (1.0 / self.p) {
            return Err(Error::Numerical(format!("exponent relation off by {residual:e}")));
        }
        Ok(BoundParams { p: self.p, q: self.q, p_star, big_d })
    }
}

pub fn conjugate(q: f64) -> f64 {
    if q == 1.0 {
        f64::INFINITY
    } else {
        q / (q - 1.0)
    }
}

/// Exponents bound to a cone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub p: f64,
    pub q: f64,
    pub p_star: f64,
    pub big_d: f64,
}

impl BoundParams {
    /// Exponents of the space the functions land in, `L^{p*,q}`.
    pub fn target(&self) -> LorentzParams {
        LorentzParams { p: self.p_star, q: self.q }
    }

    /// Exponents of the space the gradients live in, `L^{p,q}`.
    pub fn source(&self) -> LorentzParams {
        LorentzParams { p: self.p, q: self.q }
    }

    pub fn q_prime(&self) -> f64 {
        conjugate(self.q)
    }
}

/// Nonincreasing functions on `(0, ∞)` with exact weighted power integrals.
pub trait Rearranged {
    /// `∫_0^∞ t^{s-1} f(t)^q dt`.
    fn weighted_integral(&self, s: f64, q: f64) -> Result<f64>;
    fn is_nonincreasing(&self) -> bool;
}

impl Rearranged for StepFunction1D {
    fn weighted_integral(&self, s: f64, q: f64) -> Result<f64> {
        let mut total = 0.0;
        for (i, &v) in self.values().iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let piece = power_integral(self.start(i), self.ends()[i], s)
                .ok_or_else(|| Error::Domain(format!("t^({s}-1) is not integrable at 0")))?;
            total += v.powf(q) * piece;
        }
        Ok(total)
    }

    fn is_nonincreasing(&self) -> bool {
        StepFunction1D::is_nonincreasing(self)
    }
}

impl Rearranged for RadialProfile {
    fn weighted_integral(&self, s: f64, q: f64) -> Result<f64> {
        self.segments().iter().map(|seg| weighted_power_integral(&seg.law, seg.t0, seg.t1, s, q)).sum()
    }

    fn is_nonincreasing(&self) -> bool {
        true
    }
}

/// `(∫_0^∞ t^{q/p - 1} f*(t)^q dt)^{1/q}`, segment by segment in closed form.
pub fn lorentz_norm_rearranged<R: Rearranged + ?Sized>(f: &R, params: LorentzParams) -> Result<f64> {
    if !f.is_nonincreasing() {
        return Err(Error::Validation("rearranged norm needs a nonincreasing input".into()));
    }
    Ok(f.weighted_integral(params.q / params.p, params.q)?.powf(1.0 / params.q))
}

/// Anything with a distribution function on the half-line.
pub trait LevelSets {
    fn piecewise(&self) -> PiecewiseFn;
}

impl LevelSets for PiecewiseFn {
    fn piecewise(&self) -> PiecewiseFn {
        self.clone()
    }
}

impl LevelSets for StepFunction1D {
    fn piecewise(&self) -> PiecewiseFn {
        self.to_piecewise()
    }
}

impl LevelSets for RadialProfile {
    fn piecewise(&self) -> PiecewiseFn {
        self.to_piecewise()
    }
}

impl LevelSets for GradientDensity {
    fn piecewise(&self) -> PiecewiseFn {
        self.to_piecewise()
    }
}

impl LevelSets for SampledField {
    fn piecewise(&self) -> PiecewiseFn {
        self.to_piecewise()
    }
}

/// `(p ∫_0^∞ τ^{q-1} λ(τ)^{q/p} dτ)^{1/q}` by adaptive quadrature over levels.
pub fn lorentz_norm_distributional<L: LevelSets + ?Sized>(f: &L, params: LorentzParams) -> Result<f64> {
    f.piecewise().levels()?.lorentz_norm(params.p, params.q)
}

/// Both sides of the Hardy inequality behind the embedding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardyReport {
    pub lhs: f64,
    pub rhs: f64,
}

impl HardyReport {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-9)
    }
}

/// `lhs = ‖t^{1/p* - 1/q} ∫_t^∞ f‖_{L^q}`, `rhs = p* ‖t^{1 + 1/p* - 1/q} f‖_{L^q}` for `f >= 0`.
pub fn hardy_check(f: &PiecewiseFn, params: &BoundParams) -> Result<HardyReport> {
    let (q, p_star) = (params.q, params.p_star);
    let mut pieces: Vec<&Piece> = f.pieces.iter().filter(|p| p.t1 > p.t0).collect();
    pieces.sort_by(|a, b| a.t0.total_cmp(&b.t0));
    for w in pieces.windows(2) {
        if w[1].t0 < w[0].t1 {
            return Err(Error::Validation("Hardy input pieces overlap".into()));
        }
    }
    let mut rhs_q = 0.0;
    for p in &pieces {
        let lo = p.law.eval(p.t1).min(p.law.eval(if p.t0 > 0.0 { p.t0 } else { 0.5 * p.t1 }));
        if lo < 0.0 {
            return Err(Error::Validation(format!("Hardy input is negative on [{}, {}]", p.t0, p.t1)));
        }
        rhs_q += weighted_power_integral(&p.law, p.t0, p.t1, q + q / p_star, q)?;
    }
    let rhs = p_star * rhs_q.powf(1.0 / q);

    // F(t) = ∫_t^∞ f, built right to left.
    let mut tail_pieces: Vec<Piece> = Vec::new();
    let mut upper = 0.0;
    let mut right_edge = pieces.last().map(|p| p.t1).unwrap_or(0.0);
    for p in pieces.iter().rev() {
        if p.t1 < right_edge {
            tail_pieces.push(Piece { t0: p.t1, t1: right_edge, law: Law::constant(upper) });
        }
        let mut anti = Law { offset: 0.0, terms: Vec::new() };
        anti = anti.add(&Law::affine(0.0, p.law.offset));
        for t in &p.law.terms {
            if (t.exponent + 1.0).abs() < 1e-14 {
                return Err(Error::Domain(format!(
                    "segment [{}, {}] has a t^-1 law; its tail integral is logarithmic",
                    p.t0, p.t1
                )));
            }
            anti = anti.add(&Law::power(t.coeff / (t.exponent + 1.0), t.exponent + 1.0, 0.0));
        }
        let at_top = anti.eval(p.t1);
        let law = Law::constant(upper + at_top).add(&anti.scaled(-1.0));
        upper = law.eval(p.t0);
        if !upper.is_finite() {
            return Err(Error::Domain(format!("tail integral diverges on segment [{}, {}]", p.t0, p.t1)));
        }
        tail_pieces.push(Piece { t0: p.t0, t1: p.t1, law });
        right_edge = p.t0;
    }
    if right_edge > 0.0 {
        tail_pieces.push(Piece { t0: 0.0, t1: right_edge, law: Law::constant(upper) });
    }
    let mut lhs_q = 0.0;
    for p in &tail_pieces {
        lhs_q += weighted_power_integral(&p.law, p.t0, p.t1, q / p_star, q)?;
    }
    Ok(HardyReport { lhs: lhs_q.powf(1.0 / q), rhs })
}

/// `‖φ χ_(0, t0)‖_{p,q}` in the measure coordinate.
pub fn restricted_norm_head(profile: &RadialProfile, t0: f64, params: LorentzParams) -> Result<f64> {
    if !(t0 >= 0.0) {
        return Err(Error::Domain(format!("restriction endpoint must be nonnegative, got {t0}")));
    }
    let s = params.q / params.p;
    let mut total = 0.0;
    for seg in profile.segments() {
        if seg.t0 >= t0 {
            break;
        }
        total += weighted_power_integral(&seg.law, seg.t0, seg.t1.min(t0), s, params.q)?;
    }
    Ok(total.powf(1.0 / params.q))
}

/// `‖u χ_{B_R}‖_{p,q}` for the radial realization of `profile`.
pub fn restricted_norm_ball(profile: &RadialProfile, radius: f64, params: LorentzParams) -> Result<f64> {
    let t0 = profile.cone().ball_measure(radius)?;
    restricted_norm_head(profile, t0, params)
}

/// `∫_0^{hi-lo} s^{s_exp - 1} φ(s + lo)^q ds`: the rearranged window `φ χ_(lo, hi)` in a weighted power integral.
pub fn window_power_integral(profile: &RadialProfile, lo: f64, hi: f64, s_exp: f64, q: f64) -> Result<f64> {
    if !(lo >= 0.0 && hi >= lo) {
        return Err(Error::Domain(format!("invalid window ({lo}, {hi})")));
    }
    shifted_power_integral(profile, lo, 0.0, hi - lo, s_exp, q)
}

/// `∫_a^b t^{s_exp - 1} φ(t + shift)^q dt` for `0 <= a <= b`.
pub fn shifted_power_integral(profile: &RadialProfile, shift: f64, a: f64, b: f64, s_exp: f64, q: f64) -> Result<f64> {
    if !(shift >= 0.0 && a >= 0.0 && b >= a) {
        return Err(Error::Domain(format!("invalid shifted integral: shift {shift}, range ({a}, {b})")));
    }
    let mut total = 0.0;
    for seg in profile.segments() {
        let (x, y) = ((seg.t0 - shift).max(a), (seg.t1 - shift).min(b));
        if !(y > x) {
            continue;
        }
        if shift == 0.0 {
            total += weighted_power_integral(&seg.law, x, y, s_exp, q)?;
        } else if seg.law.is_constant() {
            let v = seg.law.offset.abs();
            if v > 0.0 {
                total += v.powf(q)
                    * power_integral(x, y, s_exp)
                        .ok_or_else(|| Error::Domain("shifted integral diverges at 0".into()))?;
            }
        } else {
            let law = &seg.law;
            let est = integrate_auto(|t| t.powf(s_exp - 1.0) * law.eval(t + shift).max(0.0).powf(q), x, y, 1e-13, 0.0)?;
            total += est.value;
        }
    }
    Ok(total)
}

/// `‖φ χ_(lo, hi)‖_{p,q}`.
pub fn restricted_norm_window(profile: &RadialProfile, lo: f64, hi: f64, params: LorentzParams) -> Result<f64> {
    Ok(window_power_integral(profile, lo, hi, params.q / params.p, params.q)?.powf(1.0 / params.q))
}

/// `(Σ |a_j|^q)^{1/q}`, the maximum for `q = ∞`.
pub fn ell_q_norm(seq: &[f64], q: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::Domain(format!("sequence norm needs q >= 1, got {q}")));
    }
    if q == f64::INFINITY {
        return Ok(seq.iter().fold(0.0, |m, a| m.max(a.abs())));
    }
    let peak = seq.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    if peak == 0.0 {
        return Ok(0.0);
    }
    // Scaled by the peak so that large q cannot overflow.
    Ok(peak * seq.iter().map(|a| (a.abs() / peak).powf(q)).sum::<f64>().powf(1.0 / q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn params(p: f64, q: f64) -> LorentzParams {
        LorentzParams::new(p, q).unwrap()
    }

    #[test]
    fn indicator_oracle() {
        let m: f64 = 2.5;
        let f = StepFunction1D::new(vec![m], vec![1.0]).unwrap();
        for (p, q) in [(3.0f64, 1.0f64), (2.0, 2.0), (4.0, 1.5)] {
            let expect = (p / q).powf(1.0 / q) * m.powf(1.0 / p);
            let a = lorentz_norm_rearranged(&f, params(p, q)).unwrap();
            let b = lorentz_norm_distributional(&f, params(p, q)).unwrap();
            assert!((a - expect).abs() < 1e-13 * expect);
            assert!((b - expect).abs() < 1e-10 * expect);
        }
        let zero = StepFunction1D::default();
        assert_eq!(lorentz_norm_rearranged(&zero, params(2.0, 1.0)).unwrap(), 0.0);
        assert_eq!(lorentz_norm_distributional(&zero, params(2.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(LorentzParams::new(2.0, 3.0).is_err());
        assert!(LorentzParams::new(2.0, 0.5).is_err());
        let up = StepFunction1D::new(vec![1.0, 2.0], vec![1.0, 2.0]).unwrap();
        assert!(matches!(lorentz_norm_rearranged(&up, params(2.0, 1.0)), Err(Error::Validation(_))));
        let cone = WeightedCone::builtin("halfplane-x1").unwrap();
        assert!(matches!(params(3.0, 1.0).bind(&cone), Err(Error::Domain(_))));
        let b = params(1.5, 1.0).bind(&cone).unwrap();
        assert!((b.p_star - 3.0).abs() < 1e-15);
        assert_eq!(b.q_prime(), f64::INFINITY);
    }

    #[test]
    fn hardy_indicator_equality() {
        let cone = WeightedCone::builtin("halfplane-x1").unwrap();
        let bound = params(1.5, 1.0).bind(&cone).unwrap();
        let bound = BoundParams { p_star: 1.5, ..bound };
        let f = PiecewiseFn::steps(&[0.0, 1.0], &[1.0]);
        let rep = hardy_check(&f, &bound).unwrap();
        assert!((rep.lhs - 0.9).abs() < 1e-12, "{rep:?}");
        assert!((rep.rhs - 0.9).abs() < 1e-12);
        let rep = hardy_check(&PiecewiseFn::default(), &bound).unwrap();
        assert_eq!((rep.lhs, rep.rhs), (0.0, 0.0));
    }

    #[test]
    fn restrictions() {
        let cone = Arc::new(WeightedCone::builtin("halfplane-x1").unwrap());
        let prof = crate::profile::alvino_profile(cone, 3.0, 1e-6, 1.0).unwrap();
        let par = params(3.0, 1.0);
        assert_eq!(restricted_norm_head(&prof, 0.0, par).unwrap(), 0.0);
        let full = lorentz_norm_rearranged(&prof, par).unwrap();
        assert_eq!(restricted_norm_head(&prof, 5.0, par).unwrap(), full);
        let mut prev = full;
        let mut t0 = 1.0;
        for _ in 0..30 {
            t0 *= 0.5;
            let v = restricted_norm_head(&prof, t0, par).unwrap();
            assert!(v < prev);
            prev = v;
        }
        // Window and head agree when the window starts at zero.
        let w = restricted_norm_window(&prof, 0.0, 0.3, par).unwrap();
        assert_eq!(w, restricted_norm_head(&prof, 0.3, par).unwrap());
        // A shifted window of a constant stretch is the indicator norm.
        let flat = restricted_norm_window(&prof, 1e-7, 5e-7, par).unwrap();
        let height = prof.value(1e-7);
        let expect = height * 3.0 * (4e-7f64).powf(1.0 / 3.0);
        assert!((flat - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn sequence_norms() {
        assert_eq!(ell_q_norm(&[3.0, 4.0], 2.0).unwrap(), 5.0);
        assert_eq!(ell_q_norm(&[1.0, -2.0, 0.5], 1.0).unwrap(), 3.5);
        assert_eq!(ell_q_norm(&[1.0, -2.0, 0.5], f64::INFINITY).unwrap(), 2.0);
        let (a, qp): (f64, f64) = (0.3, 3.0);
        let seq: Vec<f64> = (1..200).map(|j| a.powi(j)).collect();
        let expect = a * (1.0 - a.powf(qp)).powf(-1.0 / qp);
        assert!((ell_q_norm(&seq, qp).unwrap() - expect).abs() < 1e-15);
    }
}
