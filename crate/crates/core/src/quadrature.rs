//! Numerical integration helpers shared by the norm and measure code.
//!
//! One-dimensional integrals go through the double-exponential rule of the
//! `quadrature` crate with recursive bisection on top, optionally in a
//! logarithmic variable for ranges spanning many decades. Closed-form power
//! integrals live here too because every exact segment formula reduces to them.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

const MAX_INTERVALS: usize = 4000;

struct Leaf {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

/// `∫_a^b f(x) dx` to relative tolerance `rel_tol` (or absolute `abs_tol`).
///
/// Global adaptive scheme: the leaf with the largest error estimate is halved
/// until the summed estimate meets the budget or the leaf cap is reached.
pub fn integrate<F>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<Estimate>
where
    F: Fn(f64) -> f64,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Numerical(format!("non-finite integration limits [{a}, {b}]")));
    }
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    // A crude three-point magnitude lets smooth integrands stop early.
    let crude = (hi - lo) * [0.25, 0.5, 0.75].iter().map(|w| f(lo + w * (hi - lo)).abs()).sum::<f64>() / 3.0;
    let target = (0.01 * rel_tol * crude).max(abs_tol).max(1e-300);
    let whole = quadrature::integrate(&f, lo, hi, target);
    let mut leaves = vec![Leaf { a: lo, b: hi, value: whole.integral, error: whole.error_estimate }];
    loop {
        let value: f64 = leaves.iter().map(|l| l.value).sum();
        let error: f64 = leaves.iter().map(|l| l.error).sum();
        let magnitude: f64 = leaves.iter().map(|l| l.value.abs()).sum();
        let budget = (rel_tol * value.abs()).max(abs_tol);
        if !value.is_finite() {
            return Err(Error::Numerical(format!("non-finite integral on [{lo:e}, {hi:e}]")));
        }
        if error <= budget || error <= 1e2 * f64::EPSILON * magnitude {
            return Ok(Estimate { value: sign * value, error });
        }
        let (worst, _) =
            leaves.iter().enumerate().max_by(|x, y| x.1.error.total_cmp(&y.1.error)).expect("at least one leaf");
        let leaf = leaves.swap_remove(worst);
        let mid = 0.5 * (leaf.a + leaf.b);
        if leaves.len() + 2 > MAX_INTERVALS || mid <= leaf.a || mid >= leaf.b {
            return Err(Error::Numerical(format!(
                "adaptive quadrature did not converge on [{lo:e}, {hi:e}] (error {error:e}, budget {budget:e})"
            )));
        }
        let child_target = (0.01 * budget).max(1e-300);
        for (x, y) in [(leaf.a, mid), (mid, leaf.b)] {
            let out = quadrature::integrate(&f, x, y, child_target);
            leaves.push(Leaf { a: x, b: y, value: out.integral, error: out.error_estimate });
        }
    }
}

/// Like [`integrate`] but substitutes `x = e^s`, which suits integrands that
/// behave like powers over `[a, b]` with `b / a` large. Requires `0 < a < b`.
pub fn integrate_log<F>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<Estimate>
where
    F: Fn(f64) -> f64,
{
    if !(a > 0.0 && b > a) {
        return Err(Error::Numerical(format!("log-scale integration needs 0 < a < b, got [{a:e}, {b:e}]")));
    }
    let (la, lb) = (a.ln(), b.ln());
    integrate(
        |s| {
            let x = s.exp().clamp(a, b);
            f(x) * x
        },
        la,
        lb,
        rel_tol,
        abs_tol,
    )
}

/// Picks the linear or logarithmic variable depending on the interval shape.
pub fn integrate_auto<F>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<Estimate>
where
    F: Fn(f64) -> f64,
{
    if a > 0.0 && b > 4.0 * a {
        integrate_log(f, a, b, rel_tol, abs_tol)
    } else {
        integrate(f, a, b, rel_tol, abs_tol)
    }
}

/// `∫_a^b t^(r-1) dt` for `0 <= a <= b`, stable when `r` is close to zero.
///
/// With `a == 0` the integral converges only for `r > 0`; `None` signals divergence.
pub fn power_integral(a: f64, b: f64, r: f64) -> Option<f64> {
    debug_assert!(a >= 0.0 && b >= a);
    if b == a {
        return Some(0.0);
    }
    if a == 0.0 {
        return if r > 0.0 { Some(b.powf(r) / r) } else { None };
    }
    let range = (b / a).ln();
    let x = r * range;
    if x.abs() < 1e-8 {
        // a^r * (e^x - 1) / r with the series of expm1 folded into the log-range.
        return Some(a.powf(r) * range * (1.0 + x / 2.0 + x * x / 6.0));
    }
    if x > 0.0 {
        Some(b.powf(r) * (-(-x).exp_m1()) / r)
    } else {
        Some(a.powf(r) * (-x.exp_m1()) / (-r))
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    let n = NonZeroUsize::new(order.max(1)).expect("order is at least one");
    GaussLegendre::new(n).iter().map(|(x, w)| (*x, *w)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_integral_matches_closed_forms() {
        assert!((power_integral(0.0, 1.0, 2.0 / 3.0).unwrap() - 1.5).abs() < 1e-15);
        let log = power_integral(1.0, 1e40, 0.0).unwrap();
        assert!((log - 40.0 * 10f64.ln()).abs() < 1e-12 * log);
        // Nearly cancelling exponent goes through the series branch.
        let r = 1e-12;
        let v = power_integral(2.0, 3.0, r).unwrap();
        assert!((v - (3.0f64 / 2.0).ln()).abs() < 1e-12);
        assert!(power_integral(0.0, 1.0, -0.5).is_none());
        assert!(power_integral(0.0, 1.0, 0.0).is_none());
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let est = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, 1e-13, 0.0).unwrap();
        assert!((est.value - 2.0).abs() < 1e-11, "{est:?}");
        let est = integrate_log(|x: f64| 1.0 / x, 1e-30, 1.0, 1e-13, 0.0).unwrap();
        assert!((est.value - 30.0 * 10f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn legendre_integrates_polynomials() {
        let rule = gauss_legendre(5);
        let s: f64 = rule.iter().map(|(x, w)| w * x.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-14);
    }
}
