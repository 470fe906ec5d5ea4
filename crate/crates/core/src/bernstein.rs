//! Almost-extremal systems of nested shell functions and their certificates.
//!
//! Every shell function is a truncated power profile normalized to unit
//! gradient norm. Shells are nested so that gradient supports are disjoint and
//! each function keeps almost all of its mass away from the next, smaller
//! ball. The certificates then bound the Sobolev quotient from below on every
//! combination of shells.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::{ConeSpec, WeightedCone};
use crate::error::{Error, Result};
use crate::law::Law;
use crate::levels::{Piece, PiecewiseFn};
use crate::lorentz::{
    conjugate, ell_q_norm, lorentz_norm_rearranged, restricted_norm_head, shifted_power_integral, BoundParams,
    LorentzParams,
};
use crate::profile::{ProfileJson, RadialProfile};
use crate::sobolev::{alvino_by_ratio, embedding_norm, gradient_norm, quotient};

/// Tail budgets `γ_j`; `ratio` is the geometric ratio used when `q > 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSequence {
    pub ratio: Option<f64>,
    pub values: Vec<f64>,
}

/// `γ_j ≡ ε₂` for `q = 1`; otherwise `γ_j = a^j` with `a^{q'} / (1 - a^{q'}) <= ε₂^{q'}`.
pub fn gamma_sequence(q: f64, eps2: f64, count: usize) -> Result<GammaSequence> {
    if !(eps2 > 0.0) || count == 0 {
        return Err(Error::Domain(format!("tail budgets need ε₂ > 0 and a positive count, got {eps2}, {count}")));
    }
    if q == 1.0 {
        return Ok(GammaSequence { ratio: None, values: vec![eps2; count] });
    }
    let qp = conjugate(q);
    let target = eps2.powf(qp);
    let ok = |a: f64| {
        let aq = a.powf(qp);
        aq / (1.0 - aq) <= target
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let values = (1..=count).map(|j| lo.powi(j as i32)).collect();
    Ok(GammaSequence { ratio: Some(lo), values })
}

/// Log-range of the shell family whose quotient equals `lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRange {
    /// `t_max / eps` of the truncated power profile.
    pub ratio: f64,
    pub quotient: f64,
    /// The family's quotient exceeds `lambda` already at the smallest range, so
    /// the norm cannot be normalized down to `lambda` exactly.
    pub saturated: bool,
}

const MAX_LOG_RANGE: f64 = 690.0; // ln(1e300)
const SATURATION_RATIO: f64 = 2.0;

/// Finds the shell log-range by expansion and bisection on `ln(t_max / eps)`.
pub fn find_log_range(cone: &Arc<WeightedCone>, params: LorentzParams, lambda: f64) -> Result<LogRange> {
    let bound = params.bind(cone)?;
    let norm_e = embedding_norm(cone, params)?;
    if !(lambda > 0.0 && lambda < norm_e) {
        return Err(Error::Infeasible(format!("λ = {lambda} must lie strictly between 0 and ‖E‖ = {norm_e}")));
    }
    let q_at =
        |x: f64| -> Result<f64> { Ok(quotient(&alvino_by_ratio(cone.clone(), &bound, x.exp())?, params)?.quotient) };
    let x_small = SATURATION_RATIO.ln();
    let q_small = q_at(x_small)?;
    let (mut lo, mut hi) = if q_small >= lambda {
        let x_tiny = 1e-6f64.ln_1p();
        if q_at(x_tiny)? >= lambda {
            return Ok(LogRange { ratio: SATURATION_RATIO, quotient: q_small, saturated: true });
        }
        (x_tiny, x_small)
    } else {
        let mut hi = x_small;
        loop {
            let lo = hi;
            hi = (2.0 * hi).min(MAX_LOG_RANGE);
            let q = q_at(hi)?;
            if q >= lambda {
                break (lo, hi);
            }
            if hi >= MAX_LOG_RANGE {
                return Err(Error::Resource(format!(
                    "λ = {lambda} needs a shell log-range beyond 1e300 (quotient {q} at the limit)"
                )));
            }
        }
    };
    let mut q_hi = q_at(hi)?;
    for _ in 0..200 {
        if (q_hi - lambda).abs() <= 1e-14 * lambda {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let q = q_at(mid)?;
        if q >= lambda {
            hi = mid;
            q_hi = q;
        } else {
            lo = mid;
        }
    }
    Ok(LogRange { ratio: hi.exp(), quotient: q_hi, saturated: false })
}

/// One shell function with its radii.
#[derive(Debug, Clone)]
pub struct ShellFunction {
    pub profile: RadialProfile,
    pub inner_radius: f64,
    pub range: LogRange,
}

fn normalized_shell(cone: &Arc<WeightedCone>, params: LorentzParams, ratio: f64, delta: f64) -> Result<RadialProfile> {
    let bound = params.bind(cone)?;
    let raw = crate::profile::alvino_profile(cone.clone(), bound.p_star, delta / ratio, delta)?;
    let g = gradient_norm(&raw.gradient_density()?, params)?;
    raw.scale_amplitude(1.0 / g)
}

/// A profile flat on `B_r`, supported in `B_R`, with unit gradient norm and norm `lambda`.
pub fn build_shell_function(
    cone: Arc<WeightedCone>,
    params: LorentzParams,
    lambda: f64,
    outer_radius: f64,
) -> Result<ShellFunction> {
    if !(outer_radius > 0.0) {
        return Err(Error::Domain(format!("outer radius must be positive, got {outer_radius}")));
    }
    let range = find_log_range(&cone, params, lambda)?;
    let delta = cone.ball_measure(outer_radius)?;
    let profile = normalized_shell(&cone, params, range.ratio, delta)?;
    let inner_radius = cone.radius_of_measure(delta / range.ratio);
    Ok(ShellFunction { profile, inner_radius, range })
}

/// One shell of the system.
#[derive(Debug, Clone)]
pub struct ShellSpec {
    pub index: usize,
    pub outer_radius: f64,
    pub inner_radius: f64,
    pub delta: f64,
    /// Radius where both the tail and the shell-energy conditions first hold.
    pub tilde_radius: f64,
    pub next_delta: f64,
    pub gamma: f64,
    pub tail_norm: f64,
    /// `(1+ε₁)^q ∫_{δ_{j+1}}^{δ_j} t^{q/p*-1} (ũ_j)*(t)^q dt`.
    pub shell_energy: f64,
    pub norm: f64,
    pub gradient_norm: f64,
    pub profile: RadialProfile,
}

#[derive(Debug, Clone)]
pub struct AlmostExtremalSystem {
    pub cone: Arc<WeightedCone>,
    pub params: BoundParams,
    pub lambda: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub embedding_norm: f64,
    pub gamma: GammaSequence,
    pub range: LogRange,
    pub shells: Vec<ShellSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub shell: Option<usize>,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &str, shell: Option<usize>, pass: bool, detail: String) -> InvariantCheck {
    InvariantCheck { name: name.to_string(), shell, pass, detail }
}

/// Largest `x` in `(0, hi]` with `pred(x)`, for a predicate that holds on an interval `(0, x*]`.
fn largest_feasible<F: Fn(f64) -> Result<bool>>(pred: F, hi: f64, what: &str) -> Result<f64> {
    if pred(hi)? {
        return Ok(hi);
    }
    let mut lo = hi;
    loop {
        lo *= 1e-3;
        if lo < 1e-300 {
            return Err(Error::Resource(format!("{what}: no feasible radius above 1e-300 measure units")));
        }
        if pred(lo)? {
            break;
        }
    }
    let mut top = hi;
    for _ in 0..80 {
        let mid = (lo * top).sqrt();
        if pred(mid)? {
            lo = mid;
        } else {
            top = mid;
        }
    }
    if !pred(lo)? {
        return Err(Error::Internal(format!(
            "{what}: bisection lost feasibility, the restricted norm is not monotone"
        )));
    }
    Ok(lo)
}

fn tail_norm(profile: &RadialProfile, below: f64, params: &BoundParams) -> Result<f64> {
    restricted_norm_head(profile, below, params.target())
}

fn shell_energy(profile: &RadialProfile, next: f64, eps1: f64, params: &BoundParams) -> Result<f64> {
    let (q, s) = (params.q, params.q / params.p_star);
    let delta = profile.support_end();
    Ok((1.0 + eps1).powf(q) * shifted_power_integral(profile, next, next, delta, s, q)?)
}

/// Builds `m` nested shells for `0 < lambda < ‖E‖`.
pub fn construct_system(
    cone: Arc<WeightedCone>,
    params: LorentzParams,
    m: usize,
    lambda: f64,
    eps1: f64,
    eps2: f64,
) -> Result<AlmostExtremalSystem> {
    if m == 0 {
        return Err(Error::Domain("a system needs at least one shell".into()));
    }
    if !(eps1 > 0.0 && eps2 > 0.0) {
        return Err(Error::Domain(format!("ε₁ and ε₂ must be positive, got {eps1}, {eps2}")));
    }
    let bound = params.bind(&cone)?;
    let norm_e = embedding_norm(&cone, params)?;
    let range = find_log_range(&cone, params, lambda)?;
    let gamma = gamma_sequence(params.q, eps2, m)?;
    let lambda_q = lambda.powf(params.q);
    let mut delta = cone.ball_measure(1.0)?;
    let mut shells = Vec::with_capacity(m);
    for j in 1..=m {
        let profile = normalized_shell(&cone, params, range.ratio, delta)?;
        let eps_j = delta / range.ratio;
        let g = gamma.values[j - 1];
        let x_tail = largest_feasible(|x| Ok(tail_norm(&profile, x, &bound)? <= g), eps_j, "tail budget")?;
        let x_energy =
            largest_feasible(|x| Ok(shell_energy(&profile, x, eps1, &bound)? >= lambda_q), eps_j, "shell energy")?;
        let tilde = x_tail.min(x_energy);
        let next = (0.5 * tilde).min(0.5 * delta / j as f64);
        if !(next > 1e-300) {
            return Err(Error::Resource(format!("shell {j} would fall below 1e-300 measure units")));
        }
        shells.push(ShellSpec {
            index: j,
            outer_radius: cone.radius_of_measure(delta),
            inner_radius: cone.radius_of_measure(eps_j),
            delta,
            tilde_radius: cone.radius_of_measure(tilde),
            next_delta: next,
            gamma: g,
            tail_norm: tail_norm(&profile, next, &bound)?,
            shell_energy: shell_energy(&profile, next, eps1, &bound)?,
            norm: lorentz_norm_rearranged(&profile, bound.target())?,
            gradient_norm: gradient_norm(&profile.gradient_density()?, params)?,
            profile,
        });
        delta = next;
    }
    let system =
        AlmostExtremalSystem { cone, params: bound, lambda, eps1, eps2, embedding_norm: norm_e, gamma, range, shells };
    let failed: Vec<String> =
        system.verify()?.into_iter().filter(|c| !c.pass).map(|c| format!("{}: {}", c.name, c.detail)).collect();
    if !failed.is_empty() {
        return Err(Error::Internal(format!("constructed system violates invariants: {}", failed.join("; "))));
    }
    Ok(system)
}

/// Result of one certificate evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub lhs: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    /// `λ / (1 + ε₁) - ε₂`.
    pub bound: f64,
    pub empirical_min: f64,
    pub directions: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub trials: usize,
    pub passed: usize,
    /// Smallest relative slack `(lhs - bound) / bound` (superadditivity) or `(bound - lhs) / bound` (gradient).
    pub worst_slack: f64,
}

impl AlmostExtremalSystem {
    pub fn m(&self) -> usize {
        self.shells.len()
    }

    fn lorentz(&self) -> LorentzParams {
        self.params.source()
    }

    /// Recomputes every invariant from the stored profiles.
    pub fn verify(&self) -> Result<Vec<InvariantCheck>> {
        let mut out = Vec::new();
        let params = self.params;
        out.push(check(
            "lambda-range",
            None,
            self.lambda > 0.0 && self.lambda < self.embedding_norm && self.eps1 > 0.0 && self.eps2 > 0.0,
            format!("λ = {}, ‖E‖ = {}, ε₁ = {}, ε₂ = {}", self.lambda, self.embedding_norm, self.eps1, self.eps2),
        ));
        let gnorm = ell_q_norm(&self.gamma.values, params.q_prime())?;
        out.push(check("gamma-budget", None, gnorm <= self.eps2 * (1.0 + 1e-12), format!("‖γ‖ = {gnorm}")));
        let lambda_q = self.lambda.powf(params.q);
        for (i, s) in self.shells.iter().enumerate() {
            let j = s.index;
            let next_radius = self.cone.radius_of_measure(s.next_delta);
            out.push(check(
                "nesting",
                Some(j),
                next_radius < s.inner_radius && s.inner_radius < s.outer_radius,
                format!("R_next = {next_radius:e}, r = {:e}, R = {:e}", s.inner_radius, s.outer_radius),
            ));
            out.push(check(
                "decay",
                Some(j),
                s.next_delta < s.delta / j as f64,
                format!("δ_next = {:e}, δ/j = {:e}", s.next_delta, s.delta / j as f64),
            ));
            let grad = gradient_norm(&s.profile.gradient_density()?, self.lorentz())?;
            out.push(check("gradient-normalized", Some(j), (grad - 1.0).abs() <= 1e-10, format!("‖∇u‖ = {grad}")));
            let norm = lorentz_norm_rearranged(&s.profile, params.target())?;
            let norm_ok = if self.range.saturated {
                norm >= self.lambda * (1.0 - 1e-10)
            } else {
                (norm - self.lambda).abs() <= 1e-10 * self.lambda
            };
            out.push(check("norm-normalized", Some(j), norm_ok, format!("‖u‖ = {norm}, λ = {}", self.lambda)));
            let support = s.profile.support_end();
            out.push(check(
                "support",
                Some(j),
                s.next_delta < support && (support - s.delta).abs() <= 1e-12 * s.delta,
                format!("δ_next = {:e}, support end = {support:e}", s.next_delta),
            ));
            let flat_until = s.profile.segments().first().filter(|seg| seg.law.is_constant()).map(|seg| seg.t1);
            let head = self.cone.ball_measure(s.inner_radius)?;
            out.push(check(
                "flat-head",
                Some(j),
                flat_until.is_some_and(|t| t >= head * (1.0 - 1e-12)),
                format!("flat up to {flat_until:?}, C r^D = {head:e}"),
            ));
            let tail = tail_norm(&s.profile, s.next_delta, &params)?;
            out.push(check(
                "tail",
                Some(j),
                tail <= s.gamma * (1.0 + 1e-12),
                format!("tail = {tail:e}, γ = {}", s.gamma),
            ));
            let energy = shell_energy(&s.profile, s.next_delta, self.eps1, &params)?;
            out.push(check(
                "shell-energy",
                Some(j),
                energy >= lambda_q * (1.0 - 1e-12),
                format!("energy = {energy}, λ^q = {lambda_q}"),
            ));
            if let Some(next) = self.shells.get(i + 1) {
                let first_grad =
                    s.profile.gradient_density()?.segments().first().map(|seg| seg.t0).unwrap_or(f64::INFINITY);
                let next_end = next.profile.gradient_density()?.segments().last().map(|seg| seg.t1).unwrap_or(0.0);
                out.push(check(
                    "disjoint-gradients",
                    Some(j),
                    next_end < first_grad && next.delta == s.next_delta,
                    format!("next gradient ends at {next_end:e}, this one starts at {first_grad:e}"),
                ));
            }
        }
        Ok(out)
    }

    /// `Σ α_j u_j` as a piecewise law on the union of breakpoints.
    pub fn combination(&self, alpha: &[f64]) -> Result<PiecewiseFn> {
        self.check_alpha(alpha)?;
        let mut cuts: Vec<f64> = vec![0.0];
        for (s, &a) in self.shells.iter().zip(alpha) {
            if a != 0.0 {
                cuts.extend(s.profile.segments().iter().map(|seg| seg.t1));
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut pieces = Vec::with_capacity(cuts.len());
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mid = 0.5 * (a + b);
            let mut law = Law::constant(0.0);
            for (s, &coef) in self.shells.iter().zip(alpha) {
                if coef == 0.0 || mid >= s.profile.support_end() {
                    continue;
                }
                let seg = s.profile.segments().iter().find(|seg| mid >= seg.t0 && mid <= seg.t1);
                if let Some(seg) = seg {
                    law = law.add(&seg.law.scaled(coef));
                }
            }
            pieces.push(Piece { t0: a, t1: b, law });
        }
        Ok(PiecewiseFn::new(pieces))
    }

    /// `Σ |α_j| ψ_j` on the disjoint gradient supports.
    pub fn gradient_combination(&self, alpha: &[f64]) -> Result<PiecewiseFn> {
        self.check_alpha(alpha)?;
        let mut pieces = Vec::new();
        for (s, &a) in self.shells.iter().zip(alpha) {
            if a == 0.0 {
                continue;
            }
            for seg in s.profile.gradient_density()?.segments() {
                pieces.push(Piece { t0: seg.t0, t1: seg.t1, law: seg.law.scaled(a.abs()) });
            }
        }
        Ok(PiecewiseFn::new(pieces))
    }

    fn check_alpha(&self, alpha: &[f64]) -> Result<()> {
        if alpha.len() > self.m() {
            return Err(Error::Validation(format!("{} coefficients for {} shells", alpha.len(), self.m())));
        }
        if let Some(a) = alpha.iter().find(|a| !a.is_finite()) {
            return Err(Error::Validation(format!("coefficient {a} is not finite")));
        }
        Ok(())
    }

    fn combination_norm(&self, alpha: &[f64]) -> Result<f64> {
        self.combination(alpha)?.levels()?.lorentz_norm(self.params.p_star, self.params.q)
    }

    fn gradient_combination_norm(&self, alpha: &[f64]) -> Result<f64> {
        let f = self.gradient_combination(alpha)?;
        let (p, q) = (self.params.p, self.params.q);
        if p == q {
            let total: f64 = f
                .pieces
                .iter()
                .map(|s| crate::law::weighted_power_integral(&s.law, s.t0, s.t1, 1.0, p))
                .sum::<Result<f64>>()?;
            return Ok(total.powf(1.0 / p));
        }
        f.levels()?.lorentz_norm(p, q)
    }

    pub fn lower_bound(&self) -> f64 {
        self.lambda / (1.0 + self.eps1) - self.eps2
    }

    /// `‖Σ α_j u_j‖_{p*,q} >= (λ/(1+ε₁) - ε₂) ‖α‖_q`.
    pub fn superadditivity_certificate(&self, alpha: &[f64]) -> Result<Certificate> {
        let lhs = self.combination_norm(alpha)?;
        let bound = self.lower_bound() * ell_q_norm(alpha, self.params.q)?;
        Ok(Certificate { lhs, bound, pass: lhs >= bound * (1.0 - 1e-9) })
    }

    /// `‖Σ α_j ∇u_j‖_{p,q} <= ‖α‖_q`.
    pub fn gradient_upper_certificate(&self, alpha: &[f64]) -> Result<Certificate> {
        let lhs = self.gradient_combination_norm(alpha)?;
        let bound = ell_q_norm(alpha, self.params.q)?;
        Ok(Certificate { lhs, bound, pass: lhs <= bound * (1.0 + 1e-9) })
    }

    /// Both certificates on `trials` random heavy-tailed coefficient vectors.
    pub fn certificate_sweep(&self, trials: usize, seed: u64) -> Result<(SweepSummary, SweepSummary)> {
        let results: Vec<(Certificate, Certificate)> = (0..trials)
            .into_par_iter()
            .map(|i| {
                let alpha = random_alpha(seed, i as u64, self.m());
                Ok((self.superadditivity_certificate(&alpha)?, self.gradient_upper_certificate(&alpha)?))
            })
            .collect::<Result<_>>()?;
        let summarize = |f: &dyn Fn(&(Certificate, Certificate)) -> (bool, f64)| {
            let mut passed = 0;
            let mut worst = f64::INFINITY;
            for r in &results {
                let (pass, slack) = f(r);
                passed += pass as usize;
                worst = worst.min(slack);
            }
            SweepSummary { trials, passed, worst_slack: worst }
        };
        let sup = summarize(&|r| (r.0.pass, (r.0.lhs - r.0.bound) / r.0.bound.max(f64::MIN_POSITIVE)));
        let grad = summarize(&|r| (r.1.pass, (r.1.bound - r.1.lhs) / r.1.bound.max(f64::MIN_POSITIVE)));
        Ok((sup, grad))
    }

    /// The certified bound with the smallest quotient found over random directions of the span.
    pub fn bernstein_lower_bound(&self, directions: usize, seed: u64) -> Result<LowerBoundReport> {
        let bound = self.lower_bound();
        let ratios: Vec<f64> = (0..directions)
            .into_par_iter()
            .map(|i| {
                let alpha = random_alpha(seed, i as u64, self.m());
                let den = self.gradient_combination_norm(&alpha)?;
                if den == 0.0 {
                    return Ok(f64::INFINITY);
                }
                Ok(self.combination_norm(&alpha)? / den)
            })
            .collect::<Result<_>>()?;
        let empirical_min = ratios.into_iter().fold(f64::INFINITY, f64::min);
        Ok(LowerBoundReport { bound, empirical_min, directions, pass: empirical_min >= bound * (1.0 - 1e-9) })
    }

    /// `‖g χ_{B_{R_j}}‖_{p*,q}` along the shells.
    pub fn absolute_continuity_witness(&self, g: &RadialProfile) -> Result<Vec<f64>> {
        if g.cone().spec() != self.cone.spec() {
            return Err(Error::Validation("witness profile lives on a different cone".into()));
        }
        self.shells.iter().map(|s| restricted_norm_head(g, s.delta, self.params.target())).collect()
    }
}

/// Signed Cauchy coefficients, about a fifth of them zeroed; deterministic per `(seed, index)`.
pub fn random_alpha(seed: u64, index: u64, m: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let cauchy = Cauchy::new(0.0, 1.0).expect("unit Cauchy");
    let mut alpha: Vec<f64> = (0..m)
        .map(|_| {
            let zero: f64 = rand::Rng::random(&mut rng);
            let v: f64 = cauchy.sample(&mut rng);
            if zero < 0.2 {
                0.0
            } else {
                v
            }
        })
        .collect();
    if alpha.iter().all(|a| *a == 0.0) {
        alpha[(index as usize) % m] = 1.0;
    }
    alpha
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ShellJson {
    index: usize,
    outer_radius: f64,
    inner_radius: f64,
    delta: f64,
    tilde_radius: f64,
    next_delta: f64,
    gamma: f64,
    tail_norm: f64,
    shell_energy: f64,
    norm: f64,
    gradient_norm: f64,
    profile: ProfileJson,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SystemJson {
    cone: ConeSpec,
    params: BoundParams,
    lambda: f64,
    eps1: f64,
    eps2: f64,
    embedding_norm: f64,
    gamma: GammaSequence,
    range: LogRange,
    lower_bound: f64,
    shells: Vec<ShellJson>,
}

impl AlmostExtremalSystem {
    pub fn to_json(&self) -> SystemJson {
        SystemJson {
            cone: self.cone.spec().clone(),
            params: self.params,
            lambda: self.lambda,
            eps1: self.eps1,
            eps2: self.eps2,
            embedding_norm: self.embedding_norm,
            gamma: self.gamma.clone(),
            range: self.range,
            lower_bound: self.lower_bound(),
            shells: self
                .shells
                .iter()
                .map(|s| ShellJson {
                    index: s.index,
                    outer_radius: s.outer_radius,
                    inner_radius: s.inner_radius,
                    delta: s.delta,
                    tilde_radius: s.tilde_radius,
                    next_delta: s.next_delta,
                    gamma: s.gamma,
                    tail_norm: s.tail_norm,
                    shell_energy: s.shell_energy,
                    norm: s.norm,
                    gradient_norm: s.gradient_norm,
                    profile: s.profile.to_json(),
                })
                .collect(),
        }
    }

    /// Rebuilds a system from JSON; call [`AlmostExtremalSystem::verify`] to re-check it.
    pub fn from_json(json: &SystemJson) -> Result<Self> {
        let cone = Arc::new(WeightedCone::new(json.cone.clone())?);
        let shells = json
            .shells
            .iter()
            .map(|s| {
                Ok(ShellSpec {
                    index: s.index,
                    outer_radius: s.outer_radius,
                    inner_radius: s.inner_radius,
                    delta: s.delta,
                    tilde_radius: s.tilde_radius,
                    next_delta: s.next_delta,
                    gamma: s.gamma,
                    tail_norm: s.tail_norm,
                    shell_energy: s.shell_energy,
                    norm: s.norm,
                    gradient_norm: s.gradient_norm,
                    profile: RadialProfile::from_json(&s.profile, Some(cone.clone()))?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(AlmostExtremalSystem {
            cone,
            params: json.params,
            lambda: json.lambda,
            eps1: json.eps1,
            eps2: json.eps2,
            embedding_norm: json.embedding_norm,
            gamma: json.gamma.clone(),
            range: json.range,
            shells,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cone(name: &str) -> Arc<WeightedCone> {
        Arc::new(WeightedCone::builtin(name).unwrap())
    }

    #[test]
    fn gamma_examples() {
        let g = gamma_sequence(1.0, 0.05, 4).unwrap();
        assert_eq!(g.values, vec![0.05; 4]);
        let g = gamma_sequence(2.0, 0.1, 60).unwrap();
        let a = g.ratio.unwrap();
        // a² / (1 - a²) <= 0.01  ⇔  a <= 0.1 / √1.01.
        let a_max = 0.1 / 1.01f64.sqrt();
        assert!(a <= a_max && a_max - a < 1e-15);
        let norm = ell_q_norm(&g.values, 2.0).unwrap();
        assert!(norm <= 0.1 && (norm - a / (1.0 - a * a).sqrt()).abs() < 1e-15);
        assert_eq!(gamma_sequence(3.0, 0.2, 1).unwrap().values.len(), 1);
    }

    #[test]
    fn shell_functions() {
        let c = cone("halfplane-x1");
        let par = LorentzParams::new(1.5, 1.0).unwrap();
        let e = embedding_norm(&c, par).unwrap();
        let half = build_shell_function(c.clone(), par, 0.5 * e, 1.0).unwrap();
        let ninety = build_shell_function(c.clone(), par, 0.9 * e, 1.0).unwrap();
        assert!(ninety.inner_radius < half.inner_radius);
        let rep = quotient(&ninety.profile, par).unwrap();
        assert!((rep.denominator - 1.0).abs() < 1e-12);
        assert!((rep.numerator - 0.9 * e).abs() < 1e-12 * e);
        assert!(matches!(build_shell_function(c, par, e, 1.0), Err(Error::Infeasible(_))));
    }

    #[test]
    fn small_system_and_json() {
        let c = cone("halfplane-x1");
        let par = LorentzParams::new(1.5, 1.0).unwrap();
        let e = embedding_norm(&c, par).unwrap();
        let sys = construct_system(c, par, 3, 0.9 * e, 0.05, 0.05).unwrap();
        assert!(sys.verify().unwrap().iter().all(|c| c.pass));
        let single = sys.superadditivity_certificate(&[1.0]).unwrap();
        assert!(single.pass && (single.lhs - 0.9 * e).abs() < 1e-9 * e);
        let grad = sys.gradient_upper_certificate(&[1.0]).unwrap();
        assert!((grad.lhs - 1.0).abs() < 1e-10);
        let json = serde_json::to_string(&sys.to_json()).unwrap();
        let back = AlmostExtremalSystem::from_json(&serde_json::from_str(&json).unwrap()).unwrap();
        assert!(back.verify().unwrap().iter().all(|c| c.pass));
        assert_eq!(back.shells[2].profile, sys.shells[2].profile);
    }

    #[test]
    fn saturated_family_at_p_equal_one() {
        let c = cone("halfplane-x1");
        let par = LorentzParams::new(1.0, 1.0).unwrap();
        let e = embedding_norm(&c, par).unwrap();
        let sys = construct_system(c, par, 2, 0.9 * e, 0.05, 0.05).unwrap();
        assert!(sys.range.saturated);
        let cert = sys.superadditivity_certificate(&[1.0, -2.0]).unwrap();
        assert!(cert.pass);
        let grad = sys.gradient_upper_certificate(&[1.0, -2.0]).unwrap();
        assert!((grad.lhs - grad.bound).abs() < 1e-12 * grad.bound);
    }
}
