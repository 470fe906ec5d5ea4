//! Executable acceptance criteria, shared by the `selftest` command and the test suite.

use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bernstein::construct_system;
use crate::cone::{unit_ball_measure, ConeSpec, QuadratureConfig, Weight, WeightedCone};
use crate::error::Result;
use crate::law::Law;
use crate::levels::PiecewiseFn;
use crate::lorentz::{hardy_check, lorentz_norm_distributional, lorentz_norm_rearranged, BoundParams, LorentzParams};
use crate::profile::{alvino_profile, RadialProfile, Segment};
use crate::rearrange::{GridBox, SampledField, StepFunction1D, DEFAULT_CELL_ORDER};
use crate::sobolev::{
    alvino_search, embedding_norm, polya_szego_check, quotient, PolyaSzegoOptions, RearrangementMode, QUOTIENT_TOL,
};

/// Verdict of one criterion.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub elapsed_s: f64,
    pub budget_s: f64,
    pub detail: Value,
}

/// `(id, name, runtime budget in seconds)`.
pub const CRITERIA: [(u8, &str, f64); 11] = [
    (1, "ball-measure oracles", 15.0),
    (2, "sharp constant", 1.0),
    (3, "quotient upper bound", 10.0),
    (4, "truncated power approach", 1.0),
    (5, "norm formula equivalence", 10.0),
    (6, "scaling invariance", 10.0),
    (7, "rearrangement gradient inequality", 60.0),
    (8, "hardy inequality", 10.0),
    (9, "almost-extremal system", 120.0),
    (10, "absolute continuity witness", 30.0),
    (11, "lower bounds across lambda", 120.0),
];

fn cone(name: &str) -> Arc<WeightedCone> {
    Arc::new(WeightedCone::builtin(name).expect("builtin cone"))
}

fn params(p: f64, q: f64) -> LorentzParams {
    LorentzParams::new(p, q).expect("valid exponents")
}

fn rng_for(seed: u64, id: u8) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    rng
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Runs criterion `id` (1 to 11).
pub fn run_criterion(id: u8, seed: u64) -> Result<CriterionResult> {
    let &(_, name, budget_s) =
        CRITERIA.iter().find(|c| c.0 == id).ok_or_else(|| crate::Error::Validation(format!("no criterion {id}")))?;
    let start = Instant::now();
    let (ok, detail) = match id {
        1 => ball_measure_oracles(seed)?,
        2 => sharp_constant()?,
        3 => upper_bound(&mut rng_for(seed, id))?,
        4 => truncated_power_approach()?,
        5 => norm_equivalence(&mut rng_for(seed, id))?,
        6 => scaling_invariance(&mut rng_for(seed, id))?,
        7 => rearrangement_gradient(&mut rng_for(seed, id))?,
        8 => hardy(&mut rng_for(seed, id))?,
        9 => almost_extremal(seed)?,
        10 => absolute_continuity()?,
        _ => lambda_sweep(seed)?,
    };
    let elapsed_s = start.elapsed().as_secs_f64();
    Ok(CriterionResult { id, name, pass: ok && elapsed_s <= budget_s, elapsed_s, budget_s, detail })
}

/// Every criterion in order; a criterion that errors is reported as failed.
pub fn run_all(seed: u64) -> Vec<CriterionResult> {
    CRITERIA
        .iter()
        .map(|&(id, name, budget_s)| {
            run_criterion(id, seed).unwrap_or_else(|e| CriterionResult {
                id,
                name,
                pass: false,
                elapsed_s: 0.0,
                budget_s,
                detail: json!({ "error": e.to_string() }),
            })
        })
        .collect()
}

fn ball_measure_oracles(seed: u64) -> Result<(bool, Value)> {
    let cases = [("halfplane-x1", 2.0 / 3.0), ("quadrant-x1x2", 1.0 / 8.0), ("plane", std::f64::consts::PI)];
    let mut ok = true;
    let mut rows = Vec::new();
    for (name, oracle) in cases {
        let spec = ConeSpec::builtin(name).expect("builtin cone");
        let t = Instant::now();
        let product = unit_ball_measure(&spec, &QuadratureConfig::ProductRule { order: 32 })?;
        let product_s = t.elapsed().as_secs_f64();
        let t = Instant::now();
        let mc = QuadratureConfig::MonteCarlo { samples: 1_000_000, seed, partitions: 16 };
        let sampled = unit_ball_measure(&spec, &mc)?;
        let mc_s = t.elapsed().as_secs_f64();
        let product_ok = rel(product.value, oracle) <= 1e-6 && product_s < 5.0;
        let mc_ok = (sampled.value - oracle).abs() <= 3.0 * sampled.error_estimate && mc_s < 5.0;
        ok &= product_ok && mc_ok;
        rows.push(json!({
            "cone": name, "oracle": oracle,
            "product": product.value, "product_rel_err": rel(product.value, oracle), "product_s": product_s,
            "monte_carlo": sampled.value, "standard_error": sampled.error_estimate, "monte_carlo_s": mc_s,
            "pass": product_ok && mc_ok,
        }));
    }
    Ok((ok, json!({ "cases": rows })))
}

fn sharp_constant() -> Result<(bool, Value)> {
    let c = cone("halfplane-x1");
    let norm = embedding_norm(&c, params(1.0, 1.0))?;
    let from_oracle = 1.0 / ((3.0 - 1.0) * (2.0f64 / 3.0).powf(1.0 / 3.0));
    let closed = 0.5 * 1.5f64.powf(1.0 / 3.0);
    let ok = rel(norm, closed) <= 1e-9 && rel(from_oracle, closed) <= 1e-15;
    Ok((ok, json!({ "norm": norm, "closed_form": closed, "from_oracle_measure": from_oracle })))
}

/// Nonincreasing piecewise-affine profile with 2 to 10 knots.
pub fn random_affine_profile(cone: Arc<WeightedCone>, rng: &mut impl Rng) -> Result<RadialProfile> {
    let n = rng.random_range(2..=10usize);
    let span = 10f64.powf(rng.random_range(-1.0..1.0));
    let mut ts: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..span)).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let mut vs: Vec<f64> = (0..ts.len()).map(|_| rng.random_range(0.0..5.0)).collect();
    vs.sort_by(|a, b| b.total_cmp(a));
    let last = vs.len() - 1;
    vs[last] = 0.0;
    if ts.len() < 2 || vs[0] == 0.0 {
        return RadialProfile::from_knots(cone, &[(0.0, 1.0), (span, 0.0)]);
    }
    let knots: Vec<(f64, f64)> = ts.into_iter().zip(vs).collect();
    RadialProfile::from_knots(cone, &knots)
}

fn upper_bound(rng: &mut ChaCha8Rng) -> Result<(bool, Value)> {
    let mut setups: Vec<(&str, f64, f64)> = ConeSpec::BUILTIN_NAMES.iter().map(|n| (*n, 1.0, 1.0)).collect();
    setups.push(("quadrant-x1x2", 2.0, 1.0));
    let mut ok = true;
    let mut rows = Vec::new();
    for (name, p, q) in setups {
        let c = cone(name);
        let par = params(p, q);
        let mut passed = 0;
        let mut worst = 0.0f64;
        for _ in 0..500 {
            let rep = quotient(&random_affine_profile(c.clone(), rng)?, par)?;
            passed += rep.within_bound as usize;
            worst = worst.max(rep.ratio);
        }
        ok &= passed == 500;
        rows.push(json!({ "cone": name, "p": p, "q": q, "trials": 500, "passed": passed, "max_ratio": worst }));
    }
    Ok((ok, json!({ "tolerance": QUOTIENT_TOL, "cases": rows })))
}

fn truncated_power_approach() -> Result<(bool, Value)> {
    let c = cone("halfplane-x1");
    let par = params(1.5, 1.0);
    let norm = embedding_norm(&c, par)?;
    let search = alvino_search(c, par, &[1e2, 1e4, 1e8, 1e40])?;
    let ratios: Vec<f64> = search.points.iter().map(|p| p.report.ratio).collect();
    let ok = search.strictly_increasing && search.bounded && ratios[2] >= 0.9 && ratios[3] >= 0.99;
    Ok((
        ok,
        json!({ "p": 1.5, "q": 1.0, "embedding_norm": norm, "log_ranges": [1e2, 1e4, 1e8, 1e40], "ratios": ratios }),
    ))
}

/// Step function with 1 to 20 nonnegative steps in random order.
pub fn random_steps(rng: &mut impl Rng) -> Result<StepFunction1D> {
    let n = rng.random_range(1..=20usize);
    let pieces: Vec<(f64, f64)> = (0..n).map(|_| (rng.random_range(0.01..2.0), rng.random_range(0.0..3.0))).collect();
    StepFunction1D::from_lengths(&pieces)
}

fn norm_equivalence(rng: &mut ChaCha8Rng) -> Result<(bool, Value)> {
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let f = random_steps(rng)?;
        let p = rng.random_range(1.0..4.0);
        let q = rng.random_range(1.0..=p);
        let par = params(p, q);
        let a = lorentz_norm_rearranged(&f.rearrangement(), par)?;
        let b = lorentz_norm_distributional(&f, par)?;
        if a != b {
            worst = worst.max(rel(b, a));
        }
    }
    Ok((worst <= 1e-10, json!({ "trials": 200, "max_rel_diff": worst })))
}

fn scaling_invariance(rng: &mut ChaCha8Rng) -> Result<(bool, Value)> {
    let setups = [
        ("halfplane-x1", 1.0, 1.0),
        ("halfplane-x1", 1.5, 1.0),
        ("quadrant-x1x2", 2.0, 1.0),
        ("quadrant-x1x2", 3.0, 2.0),
        ("space3", 2.0, 1.5),
    ];
    let mut worst = 0.0f64;
    for i in 0..50 {
        let (name, p, q) = setups[i % setups.len()];
        let par = params(p, q);
        let profile = random_affine_profile(cone(name), rng)?;
        let base = quotient(&profile, par)?.quotient;
        for kappa in [0.5, 2.0, 10.0] {
            worst = worst.max(rel(quotient(&profile.scale(kappa)?, par)?.quotient, base));
        }
    }
    Ok((worst <= 1e-12, json!({ "profiles": 50, "kappas": [0.5, 2.0, 10.0], "max_rel_change": worst })))
}

/// `[0, 1]` on constrained axes, `[-1, 1]` on free ones, `n` cells per axis.
pub fn cone_grid(cone: &WeightedCone, n: usize) -> GridBox {
    let constrained = Weight::constrained_axes(cone);
    let lower = (0..cone.d()).map(|i| if constrained.contains(&i) { 0.0 } else { -1.0 }).collect();
    GridBox { lower, upper: vec![1.0; cone.d()], shape: vec![n; cone.d()] }
}

/// Sum of 1 to 4 bumps `c (1 - |x - y|² / r²)_+³` centred inside the grid box.
pub fn random_bump_field(cone: Arc<WeightedCone>, grid: GridBox, rng: &mut impl Rng) -> Result<SampledField> {
    let k = rng.random_range(1..=4usize);
    let bumps: Vec<(Vec<f64>, f64, f64)> = (0..k)
        .map(|_| {
            let centre = grid
                .lower
                .iter()
                .zip(&grid.upper)
                .map(|(lo, hi)| {
                    let margin = 0.1 * (hi - lo);
                    rng.random_range(lo + margin..hi - margin)
                })
                .collect();
            (centre, rng.random_range(0.15..0.6), rng.random_range(0.2..2.0))
        })
        .collect();
    SampledField::from_fn(
        cone,
        grid,
        |x| {
            bumps
                .iter()
                .map(|(y, r, c)| {
                    let s = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (r * r);
                    c * (1.0 - s).max(0.0).powi(3)
                })
                .sum()
        },
        DEFAULT_CELL_ORDER,
    )
}

fn rearrangement_gradient(rng: &mut ChaCha8Rng) -> Result<(bool, Value)> {
    let c = cone("halfplane-x1");
    let grid = cone_grid(&c, 64);
    let sorted = PolyaSzegoOptions::default();
    let unsorted = PolyaSzegoOptions { mode: RearrangementMode::Unsorted, ..sorted };
    let settings = [params(1.0, 1.0), params(2.0, 1.0)];
    let mut passed = [0usize; 2];
    let mut mutation_caught = [0usize; 2];
    let mut worst_excess = [f64::NEG_INFINITY; 2];
    let mut tolerance = 0.0;
    const FIELDS: usize = 100;
    const MUTATION_FIELDS: usize = 10;
    for i in 0..FIELDS {
        let field = random_bump_field(c.clone(), grid.clone(), rng)?;
        for (k, par) in settings.iter().enumerate() {
            let rep = polya_szego_check(&field, *par, sorted)?;
            tolerance = rep.tolerance;
            passed[k] += rep.pass as usize;
            worst_excess[k] = worst_excess[k].max(rep.lhs / rep.rhs - 1.0);
            if i < MUTATION_FIELDS && !polya_szego_check(&field, *par, unsorted)?.pass {
                mutation_caught[k] += 1;
            }
        }
    }

    let radius_measure = c.ball_measure(0.9)?;
    let law = Law::constant(1.0).add(&Law::affine(0.0, -2.0 / radius_measure)).add(&Law::power(
        1.0 / (radius_measure * radius_measure),
        2.0,
        0.0,
    ));
    let radial = RadialProfile::new(c.clone(), vec![Segment { t0: 0.0, t1: radius_measure, law }])?;
    let field = SampledField::from_fn(c, grid, |x| radial.realize(x).unwrap_or(0.0), DEFAULT_CELL_ORDER)?;
    let mut equality = Vec::new();
    let mut equality_ok = true;
    for par in settings {
        let rep = polya_szego_check(&field, par, sorted)?;
        let gap = rel(rep.lhs, rep.rhs);
        equality_ok &= gap <= rep.tolerance;
        equality.push(json!({ "p": par.p, "q": par.q, "lhs": rep.lhs, "rhs": rep.rhs, "rel_gap": gap }));
    }
    let ok =
        passed.iter().all(|&n| n == FIELDS) && mutation_caught.iter().all(|&n| n == MUTATION_FIELDS) && equality_ok;
    Ok((
        ok,
        json!({
            "grid": [64, 64], "tolerance": tolerance, "fields": FIELDS,
            "passed": passed, "worst_relative_excess": worst_excess,
            "mutation_fields": MUTATION_FIELDS, "mutation_caught": mutation_caught,
            "radial_equality": equality,
        }),
    ))
}

fn hardy(rng: &mut ChaCha8Rng) -> Result<(bool, Value)> {
    let c = cone("halfplane-x1");
    let bound = BoundParams { p_star: 1.5, ..params(1.5, 1.0).bind(&c)? };
    let indicator = hardy_check(&PiecewiseFn::steps(&[0.0, 1.0], &[1.0]), &bound)?;
    let equality_ok = (indicator.lhs - 0.9).abs() <= 1e-12 && (indicator.rhs - 0.9).abs() <= 1e-12;
    let mut passed = 0;
    for _ in 0..100 {
        let f = random_steps(rng)?;
        passed += hardy_check(&f.to_piecewise(), &bound)?.holds() as usize;
    }
    Ok((
        equality_ok && passed == 100,
        json!({ "indicator_lhs": indicator.lhs, "indicator_rhs": indicator.rhs, "random_trials": 100, "passed": passed }),
    ))
}

/// Setting shared by the system criteria: half-plane with `(p, q) = (3/2, 1)`.
pub fn system_setting() -> (Arc<WeightedCone>, LorentzParams) {
    (cone("halfplane-x1"), params(1.5, 1.0))
}

fn almost_extremal(seed: u64) -> Result<(bool, Value)> {
    let (c, par) = system_setting();
    let norm = embedding_norm(&c, par)?;
    let sys = construct_system(c, par, 6, 0.9 * norm, 0.05, 0.05)?;
    let checks = sys.verify()?;
    let invariants_ok = checks.iter().all(|c| c.pass);
    let (sup, grad) = sys.certificate_sweep(1000, seed)?;
    let lb = sys.bernstein_lower_bound(5000, seed)?;
    let expected = 0.9 * norm / 1.05 - 0.05;
    let ok = invariants_ok
        && sup.passed == sup.trials
        && grad.passed == grad.trials
        && rel(lb.bound, expected) <= 1e-15
        && lb.pass;
    Ok((
        ok,
        json!({
            "p": par.p, "q": par.q, "m": 6, "lambda": sys.lambda, "log_range": sys.range.ratio,
            "invariants": checks.len(), "invariants_failed": checks.iter().filter(|c| !c.pass).count(),
            "superadditivity": sup, "gradient_upper": grad,
            "lower_bound": lb.bound, "expected_bound": expected, "empirical_min": lb.empirical_min, "directions": lb.directions,
        }),
    ))
}

fn absolute_continuity() -> Result<(bool, Value)> {
    let (c, par) = system_setting();
    let norm = embedding_norm(&c, par)?;
    let sys = construct_system(c.clone(), par, 12, 0.9 * norm, 0.05, 0.05)?;
    let delta1 = sys.shells[0].delta;
    let g = alvino_profile(c, sys.params.p_star, delta1 * 1e-8, delta1)?;
    let g_norm = lorentz_norm_rearranged(&g, sys.params.target())?;
    let seq = sys.absolute_continuity_witness(&g)?;
    let decreasing = seq.windows(2).all(|w| w[1] < w[0]);
    let last = *seq.last().expect("twelve shells");
    Ok((
        decreasing && last <= 1e-3 * g_norm,
        json!({ "m": 12, "g_norm": g_norm, "restricted_norms": seq, "final_over_norm": last / g_norm }),
    ))
}

fn lambda_sweep(seed: u64) -> Result<(bool, Value)> {
    let (c, par) = system_setting();
    let norm = embedding_norm(&c, par)?;
    let mut ok = true;
    let mut rows = Vec::new();
    let mut previous = f64::NEG_INFINITY;
    for frac in [0.5, 0.7, 0.9] {
        let mut bounds = Vec::new();
        let mut mins = Vec::new();
        for m in 1..=6 {
            let sys = construct_system(c.clone(), par, m, frac * norm, 0.05, 0.05)?;
            let lb = sys.bernstein_lower_bound(1000, seed)?;
            ok &= lb.pass;
            bounds.push(lb.bound);
            mins.push(lb.empirical_min);
        }
        let bound = bounds[0];
        ok &= bounds.iter().all(|&b| b == bound) && bound > previous;
        previous = bound;
        rows.push(json!({
            "lambda_fraction": frac, "bound": bound, "bound_over_norm": bound / norm,
            "empirical_min_by_m": mins,
        }));
    }
    Ok((ok, json!({ "embedding_norm": norm, "eps1": 0.05, "eps2": 0.05, "fractions": rows })))
}
