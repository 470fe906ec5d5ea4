//! Segment laws `k + Σ c_i t^{e_i}` and their exact weighted integrals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_auto, power_integral};

/// One power term `coeff · t^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    pub exponent: f64,
}

/// A finite sum of powers plus a constant, the law of one profile segment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Law {
    pub offset: f64,
    pub terms: Vec<Term>,
}

const EXPONENT_MERGE: f64 = 1e-13;
const MAX_EXPANSION_POWER: u32 = 8;

impl Law {
    pub fn constant(k: f64) -> Self {
        Law { offset: k, terms: Vec::new() }
    }

    /// `a + b t`.
    pub fn affine(a: f64, b: f64) -> Self {
        Law { offset: a, terms: vec![Term { coeff: b, exponent: 1.0 }] }.normalized()
    }

    /// `k + c t^e`.
    pub fn power(c: f64, e: f64, k: f64) -> Self {
        Law { offset: k, terms: vec![Term { coeff: c, exponent: e }] }.normalized()
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.offset + self.terms.iter().map(|term| term.coeff * t.powf(term.exponent)).sum::<f64>()
    }

    pub fn derivative_at(&self, t: f64) -> f64 {
        self.terms.iter().map(|term| term.coeff * term.exponent * t.powf(term.exponent - 1.0)).sum()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    /// Drops zero coefficients and exponent-zero terms, merges equal exponents.
    pub fn normalized(mut self) -> Self {
        let mut merged: Vec<Term> = Vec::with_capacity(self.terms.len());
        for term in self.terms.drain(..) {
            if term.coeff == 0.0 {
                continue;
            }
            if term.exponent == 0.0 {
                self.offset += term.coeff;
                continue;
            }
            match merged.iter_mut().find(|m| (m.exponent - term.exponent).abs() <= EXPONENT_MERGE) {
                Some(m) => m.coeff += term.coeff,
                None => merged.push(term),
            }
        }
        merged.retain(|m| m.coeff != 0.0);
        merged.sort_by(|a, b| a.exponent.total_cmp(&b.exponent));
        Law { offset: self.offset, terms: merged }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Law {
            offset: self.offset * factor,
            terms: self.terms.iter().map(|t| Term { coeff: t.coeff * factor, exponent: t.exponent }).collect(),
        }
        .normalized()
    }

    pub fn add(&self, other: &Law) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Law { offset: self.offset + other.offset, terms }.normalized()
    }

    /// The law of `t ↦ self(factor · t)`.
    pub fn compose_scale(&self, factor: f64) -> Self {
        Law {
            offset: self.offset,
            terms: self
                .terms
                .iter()
                .map(|t| Term { coeff: t.coeff * factor.powf(t.exponent), exponent: t.exponent })
                .collect(),
        }
        .normalized()
    }

    /// `self · c t^e`; the offset becomes a term of exponent `e`.
    pub fn times_power(&self, c: f64, e: f64) -> Self {
        let mut terms: Vec<Term> =
            self.terms.iter().map(|t| Term { coeff: t.coeff * c, exponent: t.exponent + e }).collect();
        terms.push(Term { coeff: self.offset * c, exponent: e });
        Law { offset: 0.0, terms }.normalized()
    }

    pub fn mul(&self, other: &Law) -> Self {
        let mut out = Law::constant(0.0);
        out = out.add(&other.scaled(self.offset));
        for t in &self.terms {
            out = out.add(&other.times_power(t.coeff, t.exponent));
        }
        out
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut out = Law::constant(1.0);
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Interior points of `(a, b)` where the derivative vanishes.
    pub fn critical_points(&self, a: f64, b: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match self.terms.as_slice() {
            [] | [_] => {}
            [t1, t2] => {
                // c1 e1 t^{e1-1} + c2 e2 t^{e2-1} = 0  =>  t^{e1-e2} = -c2 e2 / (c1 e1)
                let ratio = -(t2.coeff * t2.exponent) / (t1.coeff * t1.exponent);
                if ratio > 0.0 && ratio.is_finite() {
                    let t = ratio.powf(1.0 / (t1.exponent - t2.exponent));
                    if t > a && t < b {
                        out.push(t);
                    }
                }
            }
            _ => out = sign_changes(|t| self.derivative_at(t), a, b),
        }
        out
    }

    /// Interior roots of the law on `(a, b)`, assuming it is monotone there.
    pub fn monotone_root(&self, a: f64, b: f64) -> Option<f64> {
        let (fa, fb) = (self.eval(a), self.eval(b));
        if !(fa * fb < 0.0) {
            return None;
        }
        if let [t] = self.terms.as_slice() {
            let x = (-self.offset / t.coeff).powf(1.0 / t.exponent);
            if x > a && x < b {
                return Some(x);
            }
        }
        Some(bisect_level(|t| self.eval(t), a, b, 0.0))
    }

    /// Inverts `sign · self(t) = level` on an interval where that quantity is monotone.
    pub fn solve_level(&self, sign: f64, level: f64, a: f64, b: f64) -> f64 {
        if let [t] = self.terms.as_slice() {
            let x = ((sign * level - self.offset) / t.coeff).powf(1.0 / t.exponent);
            if x.is_finite() {
                return x.clamp(a, b);
            }
        }
        bisect_level(|t| sign * self.eval(t), a, b, level)
    }
}

fn bisect_level<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, level: f64) -> f64 {
    let (mut lo, mut hi) = (a, b);
    let increasing = f(b) > f(a);
    for _ in 0..200 {
        let mid = if lo > 0.0 && hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > level) == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn sign_changes<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> Vec<f64> {
    let n = 64;
    let lo = if a > 0.0 { a } else { b * 1e-12 };
    let pts: Vec<f64> = (0..=n).map(|i| lo * (b / lo).powf(i as f64 / n as f64)).collect();
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let (fa, fb) = (f(w[0]), f(w[1]));
        if fa * fb < 0.0 {
            let root = bisect_level(&f, w[0], w[1], 0.0);
            if root > a && root < b {
                out.push(root);
            }
        }
    }
    out
}

/// `∫_a^b t^{s-1} |law(t)|^q dt`, exact where the algebra allows it.
///
/// Pure powers integrate in closed form; integer `q` expands the power sum;
/// anything else, or an expansion that cancels catastrophically, falls back to
/// adaptive quadrature. Divergence at the origin surfaces as a domain error.
pub fn weighted_power_integral(law: &Law, a: f64, b: f64, s: f64, q: f64) -> Result<f64> {
    if !(b > a) {
        return Ok(0.0);
    }
    let diverges =
        || Error::Domain(format!("integral of t^({s}-1)·|law|^{q} diverges at t = 0 on segment [{a:e}, {b:e}]"));
    if law.is_constant() {
        if law.offset == 0.0 {
            return Ok(0.0);
        }
        return Ok(law.offset.abs().powf(q) * power_integral(a, b, s).ok_or_else(diverges)?);
    }
    if law.offset == 0.0 && law.terms.len() == 1 {
        let t = law.terms[0];
        return Ok(t.coeff.abs().powf(q) * power_integral(a, b, s + q * t.exponent).ok_or_else(diverges)?);
    }
    let qi = q.round();
    let nonneg = law.eval(a.max(f64::MIN_POSITIVE)) >= 0.0 && law.eval(b) >= 0.0;
    if (q - qi).abs() < 1e-15 && qi >= 1.0 && qi <= MAX_EXPANSION_POWER as f64 && nonneg {
        let expanded = law.powi(qi as u32);
        let mut total = 0.0;
        let mut magnitude = 0.0;
        let mut parts = Vec::with_capacity(expanded.terms.len() + 1);
        if expanded.offset != 0.0 {
            parts.push((expanded.offset, 0.0));
        }
        parts.extend(expanded.terms.iter().map(|t| (t.coeff, t.exponent)));
        let mut ok = true;
        for (c, e) in parts {
            match power_integral(a, b, s + e) {
                Some(v) => {
                    total += c * v;
                    magnitude += (c * v).abs();
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        // A divergent single term can still leave a convergent sum; quadrature decides.
        if ok && total.abs() >= 1e-9 * magnitude {
            return Ok(total);
        }
    }
    let est = integrate_auto(|t| t.powf(s - 1.0) * law.eval(t).abs().powf(q), a, b, 1e-13, 0.0)?;
    if !est.value.is_finite() {
        return Err(diverges());
    }
    Ok(est.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algebra() {
        let l = Law::affine(2.0, -1.0);
        assert_eq!(l.eval(0.5), 1.5);
        assert_eq!(l.derivative_at(3.0), -1.0);
        let sq = l.powi(2);
        assert!((sq.eval(0.5) - 2.25).abs() < 1e-15);
        let comp = Law::power(1.0, -0.5, 0.0).compose_scale(4.0);
        assert!((comp.eval(1.0) - 0.5).abs() < 1e-15);
        let sum = Law::power(1.0, 2.0, 1.0).add(&Law::power(-1.0, 2.0, 0.0));
        assert!(sum.is_constant() && sum.offset == 1.0);
    }

    #[test]
    fn integrals_agree_with_quadrature() {
        let law =
            Law { offset: 3.0, terms: vec![Term { coeff: -1.0, exponent: 0.5 }, Term { coeff: 0.2, exponent: 1.5 }] };
        for q in [1.0, 2.0, 1.5] {
            let exact = weighted_power_integral(&law, 0.5, 2.0, 1.0 / 3.0, q).unwrap();
            let num = integrate_auto(|t| t.powf(1.0 / 3.0 - 1.0) * law.eval(t).abs().powf(q), 0.5, 2.0, 1e-14, 0.0)
                .unwrap()
                .value;
            assert!((exact - num).abs() < 1e-12 * num, "q = {q}: {exact} vs {num}");
        }
    }

    #[test]
    fn critical_points_and_roots() {
        // t^2 - 2t has derivative zero at t = 1 and root at t = 2.
        let l =
            Law { offset: 0.0, terms: vec![Term { coeff: 1.0, exponent: 2.0 }, Term { coeff: -2.0, exponent: 1.0 }] };
        let cps = l.critical_points(0.1, 5.0);
        assert_eq!(cps.len(), 1);
        assert!((cps[0] - 1.0).abs() < 1e-12);
        let root = l.monotone_root(1.0, 5.0).unwrap();
        assert!((root - 2.0).abs() < 1e-12);
        let lev = Law::power(1.0, -0.5, 0.0).solve_level(1.0, 0.5, 1.0, 10.0);
        assert!((lev - 4.0).abs() < 1e-12);
    }

    #[test]
    fn divergence_is_reported() {
        let l = Law::power(1.0, -1.0, 0.0);
        assert!(matches!(weighted_power_integral(&l, 0.0, 1.0, 1.0, 1.0), Err(Error::Domain(_))));
    }
}
