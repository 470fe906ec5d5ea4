//! Command-line front end: one configured run per invocation, one JSON report.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::bernstein::construct_system;
use crate::cone::{unit_ball_measure, ConeSpec, QuadratureConfig, WeightedCone};
use crate::error::{Error, Result};
use crate::lorentz::{ell_q_norm, lorentz_norm_distributional, lorentz_norm_rearranged, LorentzParams};
use crate::profile::{ProfileJson, RadialProfile};
use crate::rearrange::{FieldHeader, SampledField, StepFunction1D};
use crate::selftest::{cone_grid, random_bump_field, run_criterion, CRITERIA};
use crate::sobolev::{
    alvino_by_ratio, alvino_search, embedding_norm, polya_szego_chain, polya_szego_check, quotient, PolyaSzegoOptions,
    RearrangementMode, QUOTIENT_TOL,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VERDICT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "cone-sobolev", version, about = "Weighted Lorentz-Sobolev embeddings on convex cones")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Built-in cone name or path to a cone JSON file.
    #[arg(long, global = true)]
    pub cone: Option<String>,
    /// Integrability exponent.
    #[arg(long, global = true)]
    pub p: Option<f64>,
    /// Secondary Lorentz exponent.
    #[arg(long, global = true)]
    pub q: Option<f64>,
    /// Seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Report path; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Ball measure and sharp embedding constant.
    Constant(ConstantArgs),
    /// Lorentz norm of a profile or step function by both formulas.
    Norm(NormArgs),
    /// Sobolev quotient of a profile.
    Quotient(QuotientArgs),
    /// Rearrangement check on sampled fields.
    PolyaSzego(PolyaSzegoArgs),
    /// Quotients of truncated power profiles.
    Alvino(AlvinoArgs),
    /// Almost-extremal system and its certificates.
    Bernstein(BernsteinArgs),
    /// The full acceptance suite.
    Selftest(SelftestArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Constant(_) => "constant",
            Command::Norm(_) => "norm",
            Command::Quotient(_) => "quotient",
            Command::PolyaSzego(_) => "polya-szego",
            Command::Alvino(_) => "alvino",
            Command::Bernstein(_) => "bernstein",
            Command::Selftest(_) => "selftest",
        }
    }

    fn flag_options(&self) -> Result<Map<String, Value>> {
        let v = match self {
            Command::Constant(a) => serde_json::to_value(a)?,
            Command::Norm(a) => serde_json::to_value(a)?,
            Command::Quotient(a) => serde_json::to_value(a)?,
            Command::PolyaSzego(a) => serde_json::to_value(a)?,
            Command::Alvino(a) => serde_json::to_value(a)?,
            Command::Bernstein(a) => serde_json::to_value(a)?,
            Command::Selftest(a) => serde_json::to_value(a)?,
        };
        Ok(match v {
            Value::Object(m) => m.into_iter().filter(|(_, v)| !v.is_null()).collect(),
            _ => Map::new(),
        })
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ConstantArgs {
    /// `product` or `monte-carlo`.
    #[arg(long)]
    pub quadrature: Option<String>,
    /// Gauss-Legendre nodes per angle.
    #[arg(long)]
    pub order: Option<usize>,
    /// Monte Carlo sample count.
    #[arg(long)]
    pub samples: Option<u64>,
    /// Monte Carlo partitions for the error estimate.
    #[arg(long)]
    pub partitions: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct NormArgs {
    /// Profile JSON file.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    /// Step function CSV file with header `t,value`.
    #[arg(long)]
    pub steps: Option<PathBuf>,
    /// Where to write the decreasing rearrangement of `--steps` as CSV.
    #[arg(long)]
    pub rearrangement_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct QuotientArgs {
    /// Profile JSON file.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    /// Use a truncated power profile with this `t_max / eps` instead of a file.
    #[arg(long)]
    pub alvino_ratio: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct PolyaSzegoArgs {
    /// JSON header of a sampled field; requires `--field-csv`.
    #[arg(long)]
    pub field_header: Option<PathBuf>,
    /// Sample values matching `--field-header`.
    #[arg(long)]
    pub field_csv: Option<PathBuf>,
    /// Cells per axis for random fields.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Number of random bump fields.
    #[arg(long)]
    pub fields: Option<usize>,
    /// `sorted` or `unsorted`.
    #[arg(long)]
    pub mode: Option<RearrangementMode>,
    /// Multiplier on the grid-spacing tolerance.
    #[arg(long)]
    pub tolerance_constant: Option<f64>,
    /// Levels in the head-integral chain of the first field.
    #[arg(long)]
    pub chain_points: Option<usize>,
    /// Where to write the first field's decreasing rearrangement as CSV.
    #[arg(long)]
    pub curve_csv: Option<PathBuf>,
}

impl clap::ValueEnum for RearrangementMode {
    fn value_variants<'a>() -> &'a [Self] {
        &[RearrangementMode::Sorted, RearrangementMode::Unsorted]
    }
    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            RearrangementMode::Sorted => "sorted",
            RearrangementMode::Unsorted => "unsorted",
        }))
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct AlvinoArgs {
    /// Comma-separated `t_max / eps` values.
    #[arg(long, value_delimiter = ',')]
    pub ratios: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct BernsteinArgs {
    /// Number of shells.
    #[arg(long)]
    pub m: Option<usize>,
    /// `λ / ‖E‖`.
    #[arg(long)]
    pub lambda_frac: Option<f64>,
    /// Slack in the per-shell quotient.
    #[arg(long)]
    pub eps1: Option<f64>,
    /// Total tail budget.
    #[arg(long)]
    pub eps2: Option<f64>,
    /// Random coefficient vectors per certificate.
    #[arg(long)]
    pub alpha_trials: Option<usize>,
    /// Random directions for the empirical span minimum.
    #[arg(long)]
    pub directions: Option<usize>,
    /// Where to write the constructed system as JSON.
    #[arg(long)]
    pub system_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SelftestArgs {
    /// Comma-separated criterion ids; all when absent.
    #[arg(long, value_delimiter = ',')]
    pub criteria: Option<Vec<u8>>,
}

/// Built-in name or inline cone specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConeArg {
    Name(String),
    Spec(ConeSpec),
}

/// Contents of a `--config` file; every field is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    pub cone: Option<ConeArg>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub options: Map<String, Value>,
}

/// Machine-readable outcome of a run.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: Value,
    pub outputs: Value,
    pub tolerances: Value,
    pub verdicts: BTreeMap<String, bool>,
    pub pass: bool,
    /// Wall-clock data; the only part of a report that changes between identical runs.
    pub timestamp: Value,
}

struct Resolved {
    command: Command,
    cone_arg: ConeArg,
    cone_explicit: bool,
    cone: Arc<WeightedCone>,
    p: f64,
    q: f64,
    seed: u64,
    out: Option<PathBuf>,
    options: Map<String, Value>,
}

impl Resolved {
    fn params(&self) -> Result<LorentzParams> {
        LorentzParams::new(self.p, self.q)
    }

    fn options<T: DeserializeOwned>(&self) -> Result<T> {
        Ok(serde_json::from_value(Value::Object(self.options.clone()))?)
    }

    fn echo<T: Serialize>(&self, effective: &T) -> Result<Value> {
        Ok(json!({
            "command": self.command.name(),
            "cone": self.cone_arg,
            "cone_spec": self.cone.spec(),
            "p": self.p,
            "q": self.q,
            "seed": self.seed,
            "out": self.out,
            "options": serde_json::to_value(effective)?,
        }))
    }
}

fn load_cone(arg: &ConeArg) -> Result<Arc<WeightedCone>> {
    let spec = match arg {
        ConeArg::Spec(spec) => spec.clone(),
        ConeArg::Name(name) => match ConeSpec::builtin(name) {
            Some(spec) => spec,
            None if Path::new(name).exists() => serde_json::from_reader(BufReader::new(File::open(name)?))?,
            None => {
                return Err(Error::Validation(format!(
                    "unknown cone `{name}`; expected one of {:?} or a JSON file",
                    ConeSpec::BUILTIN_NAMES
                )))
            }
        },
    };
    Ok(Arc::new(WeightedCone::new(spec)?))
}

fn default_exponents(command: &Command) -> (f64, f64) {
    match command {
        Command::Alvino(_) | Command::Bernstein(_) => (1.5, 1.0),
        _ => (1.0, 1.0),
    }
}

fn resolve(cli: &Cli) -> Result<Resolved> {
    let file: RunConfig = match &cli.common.config {
        Some(path) => serde_json::from_reader(BufReader::new(File::open(path)?))?,
        None => RunConfig::default(),
    };
    if let Some(cmd) = &file.command {
        if cmd != cli.command.name() {
            return Err(Error::Validation(format!(
                "config file is for `{cmd}` but `{}` was requested",
                cli.command.name()
            )));
        }
    }
    let mut options = file.options.clone();
    options.extend(cli.command.flag_options()?);
    let flag_cone = cli.common.cone.clone().map(ConeArg::Name);
    let cone_explicit = flag_cone.is_some() || file.cone.is_some();
    let cone_arg = flag_cone.or(file.cone).unwrap_or_else(|| ConeArg::Name("halfplane-x1".into()));
    let cone = load_cone(&cone_arg)?;
    let (dp, dq) = default_exponents(&cli.command);
    Ok(Resolved {
        command: cli.command.clone(),
        cone_arg,
        cone_explicit,
        cone,
        p: cli.common.p.or(file.p).unwrap_or(dp),
        q: cli.common.q.or(file.q).unwrap_or(dq),
        seed: cli.common.seed.or(file.seed).unwrap_or(0),
        out: cli.common.out.clone().or(file.out),
        options,
    })
}

struct Outcome {
    config: Value,
    outputs: Value,
    tolerances: Value,
    verdicts: BTreeMap<String, bool>,
    timing: Value,
}

fn verdicts<const N: usize>(items: [(&str, bool); N]) -> BTreeMap<String, bool> {
    items.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct ConstantOptions {
    quadrature: String,
    order: usize,
    samples: u64,
    partitions: usize,
}

impl Default for ConstantOptions {
    fn default() -> Self {
        ConstantOptions { quadrature: "product".into(), order: 32, samples: 1_000_000, partitions: 16 }
    }
}

fn run_constant(r: &Resolved) -> Result<Outcome> {
    let o: ConstantOptions = r.options()?;
    let config = match o.quadrature.as_str() {
        "product" => QuadratureConfig::ProductRule { order: o.order },
        "monte-carlo" => QuadratureConfig::MonteCarlo { samples: o.samples, seed: r.seed, partitions: o.partitions },
        other => return Err(Error::Validation(format!("unknown quadrature `{other}`"))),
    };
    let estimate = unit_ball_measure(r.cone.spec(), &config)?;
    let params = r.params()?;
    let bound = params.bind(&r.cone)?;
    let norm = embedding_norm(&r.cone, params)?;
    let (tol_name, allowed) = match config {
        QuadratureConfig::ProductRule { .. } => ("product_rel", 1e-6 * r.cone.c_d()),
        QuadratureConfig::MonteCarlo { .. } => ("monte_carlo_standard_errors", 3.0 * estimate.error_estimate),
    };
    let agrees = (estimate.value - r.cone.c_d()).abs() <= allowed;
    Ok(Outcome {
        config: r.echo(&o)?,
        outputs: json!({
            "d": r.cone.d(), "alpha": r.cone.alpha(), "big_d": r.cone.big_d(), "extension": r.cone.is_extension(),
            "c_d": r.cone.c_d(), "c_d_error": r.cone.c_d_error(), "estimate": estimate,
            "p_star": bound.p_star, "embedding_norm": norm,
        }),
        tolerances: json!({ tol_name: if tol_name == "product_rel" { 1e-6 } else { 3.0 } }),
        verdicts: verdicts([("measure_estimate_agrees", agrees), ("embedding_norm_finite", norm.is_finite())]),
        timing: Value::Null,
    })
}

fn read_profile(r: &Resolved, path: &Path) -> Result<RadialProfile> {
    let json: ProfileJson = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    RadialProfile::from_json(&json, r.cone_explicit.then(|| r.cone.clone()))
}

fn run_norm(r: &Resolved) -> Result<Outcome> {
    let o: NormArgs = r.options()?;
    let params = r.params()?;
    let (kind, rearranged, distributional) = match (&o.profile, &o.steps) {
        (Some(path), None) => {
            let profile = read_profile(r, path)?;
            ("profile", lorentz_norm_rearranged(&profile, params)?, lorentz_norm_distributional(&profile, params)?)
        }
        (None, Some(path)) => {
            let steps = StepFunction1D::read_csv(BufReader::new(File::open(path)?))?;
            let sorted = steps.rearrangement();
            if let Some(out) = &o.rearrangement_csv {
                sorted.write_csv(BufWriter::new(File::create(out)?))?;
            }
            ("steps", lorentz_norm_rearranged(&sorted, params)?, lorentz_norm_distributional(&steps, params)?)
        }
        _ => return Err(Error::Validation("norm needs exactly one of --profile or --steps".into())),
    };
    let diff = if rearranged == distributional { 0.0 } else { (rearranged - distributional).abs() / rearranged.abs() };
    Ok(Outcome {
        config: r.echo(&o)?,
        outputs: json!({ "input": kind, "rearranged": rearranged, "distributional": distributional, "rel_diff": diff }),
        tolerances: json!({ "formula_rel": 1e-10 }),
        verdicts: verdicts([("formulas_agree", diff <= 1e-10)]),
        timing: Value::Null,
    })
}

fn run_quotient(r: &Resolved) -> Result<Outcome> {
    let mut o: QuotientArgs = r.options()?;
    let params = r.params()?;
    let profile = match (&o.profile, o.alvino_ratio) {
        (Some(path), None) => read_profile(r, path)?,
        (None, ratio) => {
            let ratio = ratio.unwrap_or(1e4);
            o.alvino_ratio = Some(ratio);
            alvino_by_ratio(r.cone.clone(), &params.bind(&r.cone)?, ratio)?
        }
        _ => return Err(Error::Validation("quotient takes --profile or --alvino-ratio, not both".into())),
    };
    let report = quotient(&profile, params)?;
    Ok(Outcome {
        config: r.echo(&o)?,
        outputs: serde_json::to_value(report)?,
        tolerances: json!({ "bound_rel": QUOTIENT_TOL }),
        verdicts: verdicts([("within_bound", report.within_bound)]),
        timing: Value::Null,
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct PolyaSzegoOptionsCli {
    field_header: Option<PathBuf>,
    field_csv: Option<PathBuf>,
    grid: usize,
    fields: usize,
    mode: RearrangementMode,
    tolerance_constant: f64,
    chain_points: usize,
    curve_csv: Option<PathBuf>,
}

impl Default for PolyaSzegoOptionsCli {
    fn default() -> Self {
        PolyaSzegoOptionsCli {
            field_header: None,
            field_csv: None,
            grid: 64,
            fields: 1,
            mode: RearrangementMode::Sorted,
            tolerance_constant: 5.0,
            chain_points: 0,
            curve_csv: None,
        }
    }
}

fn run_polya_szego(r: &Resolved) -> Result<Outcome> {
    let mut o: PolyaSzegoOptionsCli = r.options()?;
    let params = r.params()?;
    let fields: Vec<SampledField> = match (&o.field_header, &o.field_csv) {
        (Some(h), Some(c)) => {
            let header: FieldHeader = serde_json::from_reader(BufReader::new(File::open(h)?))?;
            o.fields = 1;
            vec![SampledField::from_csv(&header, BufReader::new(File::open(c)?))?]
        }
        (None, None) => {
            if o.fields == 0 || o.grid < 2 {
                return Err(Error::Validation("random fields need --fields >= 1 and --grid >= 2".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
            let grid = cone_grid(&r.cone, o.grid);
            (0..o.fields).map(|_| random_bump_field(r.cone.clone(), grid.clone(), &mut rng)).collect::<Result<_>>()?
        }
        _ => return Err(Error::Validation("--field-header and --field-csv go together".into())),
    };
    let options = PolyaSzegoOptions { tolerance_constant: o.tolerance_constant, mode: o.mode };
    let reports = fields.iter().map(|f| polya_szego_check(f, params, options)).collect::<Result<Vec<_>>>()?;
    let chain = if o.chain_points > 0 { Some(polya_szego_chain(&fields[0], params.q, o.chain_points)?) } else { None };
    if let Some(path) = &o.curve_csv {
        fields[0].rearrangement().write_csv(BufWriter::new(File::create(path)?))?;
    }
    let all = reports.iter().all(|r| r.pass);
    Ok(Outcome {
        config: r.echo(&o)?,
        outputs: json!({ "reports": reports, "chain": chain }),
        tolerances: json!({ "tolerance_constant": o.tolerance_constant, "tolerance": reports[0].tolerance }),
        verdicts: verdicts([("rearrangement_inequality", all)]),
        timing: Value::Null,
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AlvinoOptions {
    ratios: Vec<f64>,
}

impl Default for AlvinoOptions {
    fn default() -> Self {
        AlvinoOptions { ratios: vec![1e2, 1e4, 1e8, 1e40] }
    }
}

fn run_alvino(r: &Resolved) -> Result<Outcome> {
    let o: AlvinoOptions = r.options()?;
    let params = r.params()?;
    let search = alvino_search(r.cone.clone(), params, &o.ratios)?;
    Ok(Outcome {
        config: r.echo(&o)?,
        outputs: json!({ "embedding_norm": embedding_norm(&r.cone, params)?, "search": search }),
        tolerances: json!({ "bound_rel": QUOTIENT_TOL }),
        verdicts: verdicts([("strictly_increasing", search.strictly_increasing), ("bounded", search.bounded)]),
        timing: Value::Null,
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
struct BernsteinOptions {
    m: usize,
    lambda_frac: f64,
    eps1: f64,
    eps2: f64,
    alpha_trials: usize,
    directions: usize,
    system_out: Option<PathBuf>,
}

impl Default for BernsteinOptions {
    fn default() -> Self {
        BernsteinOptions {
            m: 6,
            lambda_frac: 0.9,
            eps1: 0.05,
            eps2: 0.05,
            alpha_trials: 1000,
            directions: 5000,
            system_out: None,
        }
    }
}

fn run_bernstein(r: &Resolved) -> Result<Outcome> {
    let o: BernsteinOptions = r.options()?;
    if !(o.lambda_frac > 0.0 && o.lambda_frac < 1.0) {
        return Err(Error::Validation(format!("--lambda-frac must lie in (0, 1), got {}", o.lambda_frac)));
    }
    let params = r.params()?;
    let norm = embedding_norm(&r.cone, params)?;
    let sys = construct_system(r.cone.clone(), params, o.m, o.lambda_frac * norm, o.eps1, o.eps2)?;
    let checks = sys.verify()?;
    let (sup, grad) = sys.certificate_sweep(o.alpha_trials, r.seed)?;
    let lb = sys.bernstein_lower_bound(o.directions, r.seed)?;
    if let Some(path) = &o.system_out {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, &sys.to_json())?;
        writeln!(w)?;
    }
    let gamma_norm = ell_q_norm(&sys.gamma.values, sys.params.q_prime())?;
    let shells: Vec<Value> = sys
        .shells
        .iter()
        .map(|s| {
            json!({
                "index": s.index, "outer_radius": s.outer_radius, "inner_radius": s.inner_radius,
                "tilde_radius": s.tilde_radius, "delta": s.delta, "next_delta": s.next_delta,
                "gamma": s.gamma, "tail_norm": s.tail_norm, "shell_energy": s.shell_energy,
                "norm": s.norm, "gradient_norm": s.gradient_norm,
            })
        })
        .collect();
    Ok(Outcome {
        config: r.echo(&o)?,
        outputs: json!({
            "embedding_norm": norm, "lambda": sys.lambda, "log_range": sys.range,
            "gamma_ratio": sys.gamma.ratio, "gamma_norm": gamma_norm, "shells": shells,
            "invariants": checks, "superadditivity": sup, "gradient_upper": grad, "lower_bound": lb,
        }),
        tolerances: json!({ "certificate_rel": 1e-9, "normalization_rel": 1e-10 }),
        verdicts: verdicts([
            ("invariants", checks.iter().all(|c| c.pass)),
            ("superadditivity", sup.passed == sup.trials),
            ("gradient_upper", grad.passed == grad.trials),
            ("span_minimum_above_bound", lb.pass),
        ]),
        timing: Value::Null,
    })
}

fn run_selftest(r: &Resolved) -> Result<Outcome> {
    let o: SelftestArgs = r.options()?;
    let ids: Vec<u8> = o.criteria.clone().unwrap_or_else(|| CRITERIA.iter().map(|c| c.0).collect());
    let mut results = Vec::new();
    let mut map = BTreeMap::new();
    let mut timing = Map::new();
    for id in ids {
        let res = run_criterion(id, r.seed)?;
        map.insert(format!("{:02}-{}", res.id, res.name.replace(' ', "-")), res.pass);
        timing.insert(res.id.to_string(), json!({ "elapsed_s": res.elapsed_s, "budget_s": res.budget_s }));
        results.push(
            json!({ "id": res.id, "name": res.name, "pass": res.pass, "budget_s": res.budget_s, "detail": res.detail }),
        );
    }
    Ok(Outcome {
        config: r.echo(&o)?,
        outputs: json!({ "criteria": results }),
        tolerances: json!({ "see": "per-criterion detail" }),
        verdicts: map,
        timing: Value::Object(timing),
    })
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("CONE_SOBOLEV_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Error::Validation(format!("CONE_SOBOLEV_THREADS must be a nonnegative integer, got `{raw}`")))?;
    if n > 0 {
        // A second initialization (tests running several commands in one process) is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Executes one command and returns its report.
pub fn execute(cli: &Cli) -> Result<(Report, Option<PathBuf>)> {
    configure_threads()?;
    let resolved = resolve(cli)?;
    let start = Instant::now();
    let outcome = match &resolved.command {
        Command::Constant(_) => run_constant(&resolved)?,
        Command::Norm(_) => run_norm(&resolved)?,
        Command::Quotient(_) => run_quotient(&resolved)?,
        Command::PolyaSzego(_) => run_polya_szego(&resolved)?,
        Command::Alvino(_) => run_alvino(&resolved)?,
        Command::Bernstein(_) => run_bernstein(&resolved)?,
        Command::Selftest(_) => run_selftest(&resolved)?,
    };
    let unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let pass = outcome.verdicts.values().all(|v| *v);
    let report = Report {
        tool: "cone-sobolev",
        version: env!("CARGO_PKG_VERSION"),
        command: resolved.command.name().to_string(),
        config: outcome.config,
        outputs: outcome.outputs,
        tolerances: outcome.tolerances,
        verdicts: outcome.verdicts,
        pass,
        timestamp: json!({ "unix_seconds": unix, "elapsed_s": start.elapsed().as_secs_f64(), "phases": outcome.timing }),
    };
    Ok((report, resolved.out))
}

fn write_report(report: &Report, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    match out {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path)?);
            writeln!(f, "{text}")?;
            f.flush()?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{text}") {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                other => other?,
            }
        }
    }
    Ok(())
}

/// Parses `args`, runs, writes the report and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let outcome = execute(&cli).and_then(|(report, out)| {
        write_report(&report, out.as_deref())?;
        Ok(report.pass)
    });
    match outcome {
        Ok(true) => EXIT_PASS,
        Ok(false) => {
            eprintln!("verdict failed; see report");
            EXIT_VERDICT_FAILED
        }
        Err(e) if e.is_config_error() => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_NUMERICAL
        }
    }
}
