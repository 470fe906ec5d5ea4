//! Sobolev quotients, the sharp embedding constant and the Pólya–Szegő check.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cone::WeightedCone;
use crate::error::{Error, Result};
use crate::law::weighted_power_integral;
use crate::law::Law;
use crate::levels::{Piece, PiecewiseFn};
use crate::lorentz::{lorentz_norm_rearranged, BoundParams, LevelSets, LorentzParams};
use crate::profile::{alvino_profile, GradientDensity, RadialProfile};
use crate::rearrange::{interpolation_knots, SampledField, StepFunction1D};

/// `‖E‖ = p / ((D - p) C_D^{1/D})`.
pub fn embedding_norm(cone: &WeightedCone, params: LorentzParams) -> Result<f64> {
    let big_d = cone.big_d();
    if !(params.p < big_d) {
        return Err(Error::Domain(format!("supercritical exponent: p = {} must be below D = {big_d}", params.p)));
    }
    Ok(params.p / ((big_d - params.p) * cone.c_d().powf(1.0 / big_d)))
}

/// `‖ψ‖_{p,q}`: closed form for `q = p`, otherwise through the distribution function.
pub fn gradient_norm(density: &GradientDensity, params: LorentzParams) -> Result<f64> {
    if params.q == params.p {
        let total: f64 = density
            .segments()
            .iter()
            .map(|s| weighted_power_integral(&s.law, s.t0, s.t1, 1.0, params.p))
            .sum::<Result<f64>>()?;
        return Ok(total.powf(1.0 / params.p));
    }
    crate::lorentz::lorentz_norm_distributional(density, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuotientReport {
    pub numerator: f64,
    pub denominator: f64,
    pub quotient: f64,
    pub embedding_norm: f64,
    pub ratio: f64,
    /// `quotient <= ‖E‖ (1 + 1e-9)`.
    pub within_bound: bool,
}

pub const QUOTIENT_TOL: f64 = 1e-9;

/// `‖u‖_{p*,q} / ‖∇u‖_{p,q}` for the radial realization of `profile`.
pub fn quotient(profile: &RadialProfile, params: LorentzParams) -> Result<QuotientReport> {
    let bound = params.bind(profile.cone())?;
    let norm_e = embedding_norm(profile.cone(), params)?;
    let density = profile.gradient_density()?;
    if density.is_zero() {
        return Err(Error::Precondition("constant profile: the gradient vanishes, the quotient is undefined".into()));
    }
    let numerator = lorentz_norm_rearranged(profile, bound.target())?;
    let denominator = gradient_norm(&density, params)?;
    if !(denominator > 0.0) {
        return Err(Error::Numerical(format!("gradient norm evaluated to {denominator}")));
    }
    let quotient = numerator / denominator;
    Ok(QuotientReport {
        numerator,
        denominator,
        quotient,
        embedding_norm: norm_e,
        ratio: quotient / norm_e,
        within_bound: quotient <= norm_e * (1.0 + QUOTIENT_TOL),
    })
}

/// How the radial side of the Pólya–Szegő check is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RearrangementMode {
    /// Cells sorted by value: the actual decreasing rearrangement.
    #[default]
    Sorted,
    /// Cells in grid order, a broken rearrangement used as a mutation test.
    Unsorted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyaSzegoOptions {
    /// `C` in `tol = C h`.
    pub tolerance_constant: f64,
    pub mode: RearrangementMode,
}

impl Default for PolyaSzegoOptions {
    fn default() -> Self {
        PolyaSzegoOptions { tolerance_constant: 5.0, mode: RearrangementMode::Sorted }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyaSzegoReport {
    /// `‖∇u★‖_{p,q}` from the interpolated rearrangement.
    pub lhs: f64,
    /// `‖∇u‖_{p,q}` from the sampled gradients.
    pub rhs: f64,
    pub cell_diameter: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// `ψ` of the piecewise-affine interpolant through the knots of `steps`, using `|slope|`.
fn interpolant_density(cone: &WeightedCone, steps: &StepFunction1D, spacing: f64) -> PiecewiseFn {
    let big_d = cone.big_d();
    let factor = big_d * cone.c_d().powf(1.0 / big_d);
    let pieces = interpolation_knots(cone, steps, spacing)
        .windows(2)
        .filter_map(|w| {
            let slope = ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs();
            (slope > 0.0).then(|| Piece {
                t0: w[0].0,
                t1: w[1].0,
                law: Law::power(factor * slope, (big_d - 1.0) / big_d, 0.0),
            })
        })
        .collect();
    PiecewiseFn::new(pieces)
}

fn grid_spacing(field: &SampledField) -> f64 {
    field.grid().spacing().into_iter().fold(f64::INFINITY, f64::min)
}

fn norm_of_pieces(f: &PiecewiseFn, params: LorentzParams) -> Result<f64> {
    if params.q == params.p {
        let total: f64 =
            f.pieces.iter().map(|s| weighted_power_integral(&s.law, s.t0, s.t1, 1.0, params.p)).sum::<Result<f64>>()?;
        return Ok(total.powf(1.0 / params.p));
    }
    f.levels()?.lorentz_norm(params.p, params.q)
}

fn radial_side(field: &SampledField, mode: RearrangementMode) -> StepFunction1D {
    match mode {
        RearrangementMode::Sorted => field.rearrangement(),
        RearrangementMode::Unsorted => {
            let pieces: Vec<(f64, f64)> = field
                .measures()
                .iter()
                .zip(field.values())
                .filter(|(m, v)| **m > 0.0 && **v != 0.0)
                .map(|(m, v)| (*m, v.abs()))
                .collect();
            StepFunction1D::from_lengths(&pieces).unwrap_or_default()
        }
    }
}

/// Compares `‖∇u★‖_{p,q}` with `‖∇u‖_{p,q}` on a sampled field.
pub fn polya_szego_check(
    field: &SampledField,
    params: LorentzParams,
    options: PolyaSzegoOptions,
) -> Result<PolyaSzegoReport> {
    let h = field.grid().diameter();
    if !(h > 0.0) || field.grid().cell_count() < 2 {
        return Err(Error::Validation("degenerate grid".into()));
    }
    let steps = radial_side(field, options.mode);
    let lhs = norm_of_pieces(&interpolant_density(field.cone(), &steps, grid_spacing(field)), params)?;
    let rhs = lorentz_norm_rearranged(&field.gradient_rearrangement(), params)?;
    let tolerance = options.tolerance_constant * h;
    Ok(PolyaSzegoReport { lhs, rhs, cell_diameter: h, tolerance, pass: lhs <= rhs * (1.0 + tolerance) })
}

/// One point of the chain `∫_0^t (ψ*)^q` versus `∫_0^t ((∇u)*)^q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainPoint {
    pub t: f64,
    pub radial: f64,
    pub sampled: f64,
}

/// Head integrals of both gradient rearrangements on `points` equally spaced levels of `t`.
pub fn polya_szego_chain(field: &SampledField, q: f64, points: usize) -> Result<Vec<ChainPoint>> {
    let steps = field.rearrangement();
    let radial = interpolant_density(field.cone(), &steps, grid_spacing(field)).levels()?;
    let grad = field.gradient_rearrangement();
    let grad_levels = grad.piecewise().levels()?;
    let total = steps.support_end().max(grad.support_end());
    (1..=points)
        .map(|i| {
            let t = total * i as f64 / points as f64;
            Ok(ChainPoint {
                t,
                radial: radial.head_power_integral(t, q)?,
                sampled: grad_levels.head_power_integral(t, q)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlvinoPoint {
    pub log_range: f64,
    pub report: QuotientReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlvinoSearch {
    pub points: Vec<AlvinoPoint>,
    pub strictly_increasing: bool,
    pub nondecreasing: bool,
    pub bounded: bool,
}

/// Quotients of truncated power profiles with `t_max / eps` running over `ratios`.
pub fn alvino_search(cone: Arc<WeightedCone>, params: LorentzParams, ratios: &[f64]) -> Result<AlvinoSearch> {
    let bound = params.bind(&cone)?;
    let mut points = Vec::with_capacity(ratios.len());
    for &ratio in ratios {
        if !(ratio > 1.0 && ratio.is_finite()) {
            return Err(Error::Domain(format!("log-range ratio must exceed 1, got {ratio}")));
        }
        let report = quotient(&alvino_by_ratio(cone.clone(), &bound, ratio)?, params)?;
        points.push(AlvinoPoint { log_range: ratio, report });
    }
    let q: Vec<f64> = points.iter().map(|p| p.report.quotient).collect();
    Ok(AlvinoSearch {
        strictly_increasing: q.windows(2).all(|w| w[1] > w[0]),
        nondecreasing: q.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12)),
        bounded: points.iter().all(|p| p.report.within_bound),
        points,
    })
}

/// Alvino profile on `(0, 1]` with `ratio = t_max / eps`.
pub fn alvino_by_ratio(cone: Arc<WeightedCone>, bound: &BoundParams, ratio: f64) -> Result<RadialProfile> {
    alvino_profile(cone, bound.p_star, 1.0 / ratio, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    fn cone(name: &str) -> Arc<WeightedCone> {
        Arc::new(WeightedCone::builtin(name).unwrap())
    }

    fn params(p: f64, q: f64) -> LorentzParams {
        LorentzParams::new(p, q).unwrap()
    }

    #[test]
    fn constants() {
        let e = embedding_norm(&cone("halfplane-x1"), params(1.0, 1.0)).unwrap();
        assert!((e - 0.5 * 1.5f64.powf(1.0 / 3.0)).abs() < 1e-12);
        let e = embedding_norm(&cone("quadrant-x1x2"), params(1.0, 1.0)).unwrap();
        assert!((e - 8f64.powf(0.25) / 3.0).abs() < 1e-12);
        let e = embedding_norm(&cone("space3"), params(1.0, 1.0)).unwrap();
        let expect = 0.5 * (3.0 / (4.0 * std::f64::consts::PI)).powf(1.0 / 3.0);
        assert!((e - expect).abs() < 1e-9);
        assert!(matches!(embedding_norm(&cone("halfplane-x1"), params(3.0, 1.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn tent_quotient_against_quadrature() {
        let c = cone("halfplane-x1");
        let prof = RadialProfile::from_knots(c.clone(), &[(1.0, 1.0), (2.0, 0.0)]).unwrap();
        let rep = quotient(&prof, params(1.0, 1.0)).unwrap();
        // Oracle: ∫ t^{2/3-1} φ and ∫ ψ by plain quadrature.
        let num = integrate(|t: f64| t.powf(-1.0 / 3.0) * prof.value(t), 0.0, 1.0, 1e-14, 0.0).unwrap().value
            + integrate(|t: f64| t.powf(-1.0 / 3.0) * prof.value(t), 1.0, 2.0, 1e-14, 0.0).unwrap().value;
        let factor = 3.0 * c.c_d().powf(1.0 / 3.0);
        let den = integrate(|t: f64| factor * t.powf(2.0 / 3.0), 1.0, 2.0, 1e-14, 0.0).unwrap().value;
        assert!((rep.numerator - num).abs() < 1e-12 * num, "{} vs {num}", rep.numerator);
        assert!((rep.denominator - den).abs() < 1e-12 * den);
        assert!(rep.within_bound);
        // With p = q = 1 every radial nonincreasing profile attains the constant.
        assert!((rep.ratio - 1.0).abs() < 1e-12, "{rep:?}");
    }

    #[test]
    fn tent_is_strictly_below_for_q_below_p() {
        let c = cone("halfplane-x1");
        let prof = RadialProfile::from_knots(c, &[(1.0, 1.0), (2.0, 0.0)]).unwrap();
        let rep = quotient(&prof, params(1.5, 1.0)).unwrap();
        assert!(rep.ratio < 1.0 && rep.ratio > 0.0);
    }

    #[test]
    fn constant_profile_is_rejected() {
        let prof = RadialProfile::from_knots(cone("halfplane-x1"), &[(1.0, 0.0)]).unwrap();
        assert!(matches!(quotient(&prof, params(1.0, 1.0)), Err(Error::Precondition(_))));
    }

    #[test]
    fn alvino_family_approaches_constant() {
        let res = alvino_search(cone("halfplane-x1"), params(1.5, 1.0), &[1e2, 1e4, 1e8, 1e40]).unwrap();
        assert!(res.strictly_increasing && res.bounded, "{res:?}");
        assert!(res.points[2].report.ratio >= 0.9);
        assert!(res.points[3].report.ratio >= 0.99);
    }

    #[test]
    fn scaling_invariance() {
        let c = cone("quadrant-x1x2");
        let prof = RadialProfile::from_knots(c, &[(0.2, 3.0), (0.5, 1.0), (1.5, 0.4), (2.0, 0.0)]).unwrap();
        for par in [params(1.0, 1.0), params(2.0, 1.0), params(3.0, 2.0)] {
            let base = quotient(&prof, par).unwrap().quotient;
            for kappa in [0.5, 2.0, 10.0] {
                let q = quotient(&prof.scale(kappa).unwrap(), par).unwrap().quotient;
                assert!((q - base).abs() <= 1e-12 * base, "{par:?} κ = {kappa}: {q} vs {base}");
            }
        }
    }
}
