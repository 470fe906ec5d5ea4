//! Distribution functions of piecewise power-sum functions on the half-line.
//!
//! Each piece is split into subpieces on which `|f|` is monotone. For a level
//! `τ` the superlevel set of a subpiece is then an interval whose length has a
//! closed form (single-term laws) or comes from bisection. Integrals against
//! the distribution function are evaluated by sweeping the sorted subpiece
//! endpoint values and integrating a smooth integrand between breakpoints.

use crate::error::{Error, Result};
use crate::law::Law;
use crate::quadrature::{integrate, integrate_log};

/// One piece `law` on `[t0, t1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub t0: f64,
    pub t1: f64,
    pub law: Law,
}

/// A finite collection of pieces with disjoint interiors, measured by `dt`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PiecewiseFn {
    pub pieces: Vec<Piece>,
}

#[derive(Debug, Clone)]
struct MonotonePiece {
    t0: f64,
    t1: f64,
    law: Law,
    sign: f64,
    lo: f64,
    hi: f64,
    increasing: bool,
}

impl MonotonePiece {
    fn length(&self) -> f64 {
        self.t1 - self.t0
    }

    /// Measure of `{t in piece : |f(t)| > level}` for `lo <= level <= hi`.
    fn superlevel(&self, level: f64) -> f64 {
        if level < self.lo {
            return self.length();
        }
        if level >= self.hi || self.lo == self.hi {
            return 0.0;
        }
        let x = self.law.solve_level(self.sign, level, self.t0, self.t1);
        if self.increasing {
            self.t1 - x
        } else {
            x - self.t0
        }
    }
}

/// Level-set structure ready for repeated queries.
#[derive(Debug, Clone)]
pub struct Levels {
    pieces: Vec<MonotonePiece>,
}

impl PiecewiseFn {
    pub fn new(pieces: Vec<Piece>) -> Self {
        PiecewiseFn { pieces }
    }

    /// Piecewise-constant function with values `values[i]` on `[edges[i], edges[i+1]]`.
    pub fn steps(edges: &[f64], values: &[f64]) -> Self {
        let pieces = edges
            .windows(2)
            .zip(values)
            .filter(|(w, _)| w[1] > w[0])
            .map(|(w, &v)| Piece { t0: w[0], t1: w[1], law: Law::constant(v) })
            .collect();
        PiecewiseFn { pieces }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.pieces.iter().find(|p| t >= p.t0 && t <= p.t1).map(|p| p.law.eval(t)).unwrap_or(0.0)
    }

    pub fn total_length(&self) -> f64 {
        self.pieces.iter().map(|p| p.t1 - p.t0).sum()
    }

    pub fn levels(&self) -> Result<Levels> {
        let mut out = Vec::with_capacity(self.pieces.len());
        for piece in &self.pieces {
            if !(piece.t1 > piece.t0) {
                continue;
            }
            if piece.law.is_constant() {
                let v = piece.law.offset.abs();
                out.push(MonotonePiece {
                    t0: piece.t0,
                    t1: piece.t1,
                    law: piece.law.clone(),
                    sign: 1.0,
                    lo: v,
                    hi: v,
                    increasing: false,
                });
                continue;
            }
            let mut cuts = vec![piece.t0];
            cuts.extend(piece.law.critical_points(piece.t0, piece.t1));
            cuts.push(piece.t1);
            let mut fine = vec![piece.t0];
            for w in cuts.windows(2) {
                if let Some(r) = piece.law.monotone_root(w[0].max(f64::MIN_POSITIVE), w[1]) {
                    fine.push(r);
                }
                fine.push(w[1]);
            }
            for w in fine.windows(2) {
                let (a, b) = (w[0], w[1]);
                if !(b > a) {
                    continue;
                }
                let fa = piece.law.eval(a);
                let fb = piece.law.eval(b);
                let mid = piece.law.eval(if a > 0.0 { (a * b).sqrt() } else { 0.5 * b });
                let sign = if mid < 0.0 { -1.0 } else { 1.0 };
                let (va, vb) = ((sign * fa).max(0.0), (sign * fb).max(0.0));
                if va.is_nan() || vb.is_nan() {
                    return Err(Error::Numerical(format!("non-finite value at the end of piece [{a:e}, {b:e}]")));
                }
                out.push(MonotonePiece {
                    t0: a,
                    t1: b,
                    law: piece.law.clone(),
                    sign,
                    lo: va.min(vb),
                    hi: va.max(vb),
                    increasing: vb > va,
                });
            }
        }
        Ok(Levels { pieces: out })
    }
}

impl Levels {
    /// `λ(τ) = |{|f| > τ}|`.
    pub fn distribution(&self, level: f64) -> f64 {
        self.pieces.iter().map(|p| p.superlevel(level)).sum()
    }

    pub fn max_value(&self) -> f64 {
        self.pieces.iter().map(|p| p.hi).fold(0.0, f64::max)
    }

    pub fn support_measure(&self) -> f64 {
        self.distribution(0.0)
    }

    /// `∫_0^∞ g(τ, λ(τ)) dτ` where `g(τ, 0) = 0` is assumed.
    ///
    /// Between consecutive breakpoints `λ` is smooth, so each gap is one
    /// adaptive quadrature. Pieces whose smallest value lies above a gap
    /// contribute their full length as a constant.
    pub fn level_integral<G>(&self, g: G, rel_tol: f64) -> Result<f64>
    where
        G: Fn(f64, f64) -> f64,
    {
        let mut breaks: Vec<f64> = Vec::with_capacity(2 * self.pieces.len() + 1);
        breaks.push(0.0);
        for p in &self.pieces {
            if p.hi > 0.0 {
                breaks.push(p.lo);
                breaks.push(p.hi);
            }
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        if breaks.len() < 2 {
            return Ok(0.0);
        }
        let gaps = breaks.len() - 1;
        if breaks[gaps] == f64::INFINITY {
            return Err(Error::Precondition("distribution integral of an unbounded function".into()));
        }

        // full[k]: total length of pieces with lo >= breaks[k+1].
        let mut by_lo: Vec<(f64, f64)> = self.pieces.iter().map(|p| (p.lo, p.length())).collect();
        by_lo.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut suffix = vec![0.0; by_lo.len() + 1];
        for i in (0..by_lo.len()).rev() {
            suffix[i] = suffix[i + 1] + by_lo[i].1;
        }
        let full: Vec<f64> = (0..gaps)
            .map(|k| {
                let top = breaks[k + 1];
                let idx = by_lo.partition_point(|x| x.0 < top);
                suffix[idx]
            })
            .collect();

        let mut active: Vec<Vec<usize>> = vec![Vec::new(); gaps];
        for (i, p) in self.pieces.iter().enumerate() {
            if p.hi > p.lo {
                let start = breaks.partition_point(|&b| b < p.lo);
                let end = breaks.partition_point(|&b| b < p.hi);
                for slot in active.iter_mut().take(end).skip(start) {
                    slot.push(i);
                }
            }
        }

        let lambda_at =
            |k: usize, tau: f64| full[k] + active[k].iter().map(|&i| self.pieces[i].superlevel(tau)).sum::<f64>();
        // Crude magnitude of the whole integral gives every gap an absolute floor.
        let crude: f64 = (0..gaps)
            .filter(|&k| breaks[k + 1] > breaks[k])
            .map(|k| {
                let (a, b) = (breaks[k], breaks[k + 1]);
                [0.25, 0.5, 0.75]
                    .iter()
                    .map(|w| {
                        let tau = a + w * (b - a);
                        (b - a) * g(tau, lambda_at(k, tau)).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .sum();
        let abs_tol = 1e-3 * rel_tol * crude / gaps as f64;
        let mut total = 0.0;
        for k in 0..gaps {
            let (a, b) = (breaks[k], breaks[k + 1]);
            if !(b > a) {
                continue;
            }
            let integrand = |tau: f64| g(tau, lambda_at(k, tau));
            let est = if a > 0.0 && b > 4.0 * a {
                integrate_log(integrand, a, b, rel_tol, abs_tol)?
            } else {
                integrate(integrand, a, b, rel_tol, abs_tol)?
            };
            total += est.value;
        }
        Ok(total)
    }

    /// `(p ∫_0^∞ τ^{q-1} λ(τ)^{q/p} dτ)^{1/q}`.
    pub fn lorentz_norm(&self, p: f64, q: f64) -> Result<f64> {
        let ratio = q / p;
        let v =
            self.level_integral(|tau, lam| if lam > 0.0 { tau.powf(q - 1.0) * lam.powf(ratio) } else { 0.0 }, 1e-12)?;
        Ok((p * v).powf(1.0 / q))
    }

    /// `∫_0^t (f*)^q = ∫_0^∞ q τ^{q-1} min(λ(τ), t) dτ`.
    pub fn head_power_integral(&self, t: f64, q: f64) -> Result<f64> {
        self.level_integral(|tau, lam| q * tau.powf(q - 1.0) * lam.min(t), 1e-12)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::Term;

    #[test]
    fn step_distribution() {
        let f = PiecewiseFn::steps(&[0.0, 1.0, 3.0, 4.0], &[2.0, -1.0, 3.0]);
        let lv = f.levels().unwrap();
        assert_eq!(lv.distribution(0.5), 4.0);
        assert_eq!(lv.distribution(1.5), 2.0);
        assert_eq!(lv.distribution(2.5), 1.0);
        assert_eq!(lv.distribution(3.0), 0.0);
    }

    #[test]
    fn lorentz_q_equals_p_is_lp() {
        // ∫ |f|^p over the steps.
        let f = PiecewiseFn::steps(&[0.0, 1.0, 3.0, 4.0], &[2.0, -1.0, 3.0]);
        let lv = f.levels().unwrap();
        let p: f64 = 2.5;
        let lp = (2f64.powf(p) + 2.0 + 3f64.powf(p)).powf(1.0 / p);
        assert!((lv.lorentz_norm(p, p).unwrap() - lp).abs() < 1e-11 * lp);
    }

    #[test]
    fn non_monotone_law() {
        // f(t) = 1 - (t-1)^2 = 2t - t^2 on [0, 2]; {f > τ} = (1-√(1-τ), 1+√(1-τ)).
        let law =
            Law { offset: 0.0, terms: vec![Term { coeff: 2.0, exponent: 1.0 }, Term { coeff: -1.0, exponent: 2.0 }] };
        let f = PiecewiseFn::new(vec![Piece { t0: 0.0, t1: 2.0, law }]);
        let lv = f.levels().unwrap();
        for tau in [0.1, 0.5, 0.9] {
            let expect = 2.0 * (1.0f64 - tau).sqrt();
            assert!((lv.distribution(tau) - expect).abs() < 1e-12);
        }
        // L^1 norm = 4/3 through the layer cake with p = q = 1.
        assert!((lv.lorentz_norm(1.0, 1.0).unwrap() - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn sign_change_is_split() {
        let f = PiecewiseFn::new(vec![Piece { t0: 0.0, t1: 2.0, law: Law::affine(1.0, -1.0) }]);
        let lv = f.levels().unwrap();
        assert!((lv.distribution(0.5) - 1.0).abs() < 1e-15);
        assert!((lv.lorentz_norm(1.0, 1.0).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn head_integral_of_power() {
        // f = t^{-1/2} on (0, 1]: f* = f, ∫_0^t f = 2√t.
        let f = PiecewiseFn::new(vec![Piece { t0: 1e-12, t1: 1.0, law: Law::power(1.0, -0.5, 0.0) }]);
        let lv = f.levels().unwrap();
        let t: f64 = 0.25;
        let expect = 2.0 * (t.sqrt() - 1e-6);
        let got = lv.head_power_integral(t, 1.0).unwrap();
        assert!((got - expect).abs() < 1e-10, "{got} vs {expect}");
    }
}
