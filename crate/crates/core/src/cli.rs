//! Command-line front end.
//!
//! Settings resolve in three layers: built-in defaults, then an optional TOML
//! file (`--config`), then flags. The worker count may also come from
//! `GRAVDEC_WORKERS`, which a `--workers` flag overrides.
//!
//! Exit codes: 0 success, 1 verification failure, 2 invalid input,
//! 3 region or window refusal, 4 precision shortfall, 5 I/O failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::closedform::{self, classify_region, sigma_b};
use crate::mcpurity::{self, Budget, McConfig, McError, PurityEstimate, DEFAULT_N_CAP, DEFAULT_TARGET_SE};
use crate::oracles::verify::{run_suite, VerifyOptions, CHECKS};
use crate::oracles::OracleError;
use crate::sweep::{self, FigureKind, FigureSpec, SweepError};
use crate::units::{self, resolve_sigma, MassSpec, ModelParams, ParamError, Quantity, SigmaSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_REFUSED: i32 = 3;
pub const EXIT_SHORTFALL: i32 = 4;
pub const EXIT_IO: i32 = 5;

const FIGURE_DEFAULTS: &str = "\
Defaults:
  region-map    L_C = 1; grid m/M_C: 20 geometric points on [0.05, 1]
  purity-time   L_C = 1, mu = 0.5, sigma = 30sb,60sb; grid t/t_F: 24 geometric points on [1e-3, 1]
  purity-sigma  L_C = 1, mu = 0.5,1; grid sigma/lambda_bar: 16 geometric points from 1.01x the
                lowest Region II edge to 10x the highest
  purity-mass   L_C = 1,0.5, sigma = 30sb; grid m/M_C: 0.1, 0.2, ..., 1.0";

#[derive(Debug, Parser)]
#[command(name = "gravdec", version, about = "Gravitational self-decoherence of a free Gaussian wavepacket (Planck units)")]
pub struct Cli {
    /// TOML file with keys lc_planck, mass, sigma, seed, samples, target_se, workers, out.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads, 0 = all cores. Never changes results. [default: 0]
    #[arg(long, global = true, env = "GRAVDEC_WORKERS")]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify a parameter point and print σ_B and t_F.
    Region(PointArgs),
    /// Estimate the purity η at one time (default t_F).
    Purity(PurityArgs),
    /// Estimate η on a geometric time grid ending at t_F.
    Curve(CurveArgs),
    /// Write the CSV table and manifest of one figure.
    #[command(after_help = FIGURE_DEFAULTS)]
    Figure(FigureArgs),
    /// Regenerate a figure from its manifest and compare η columns.
    Rerun(RerunArgs),
    /// Run the oracle suite; exit 0 iff every check passes.
    Verify(VerifyArgs),
    /// Convert a Planck-unit value to SI.
    Convert(ConvertArgs),
}

#[derive(Debug, Clone, Args)]
pub struct PointArgs {
    /// Cutoff length L_C in Planck lengths. [default: 1]
    #[arg(long)]
    pub lc: Option<f64>,
    /// Mass: `<x>mp` (Planck masses) or `<x>mc` (fraction of M_C = 1/L_C); bare numbers are mp.
    #[arg(long, allow_hyphen_values = true)]
    pub mass: Option<String>,
    /// Width: `<x>sb` (times σ_B), `<x>lb` (times λ̄) or `<x>lp` (Planck lengths); bare numbers are lp.
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    /// Base seed. [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fixed sample count (disables the SE target).
    #[arg(long, conflicts_with = "target_se")]
    pub samples: Option<u64>,
    /// Stop once the standard error is at most this. [default: 0.001]
    #[arg(long)]
    pub target_se: Option<f64>,
    /// Sample cap for the SE target.
    #[arg(long, default_value_t = DEFAULT_N_CAP)]
    pub n_cap: u64,
    /// Evaluate outside Region II and beyond t_F.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PurityArgs {
    #[command(flatten)]
    pub point: PointArgs,
    #[command(flatten)]
    pub mc: McArgs,
    /// Time in Planck units. [default: t_F]
    #[arg(long)]
    pub t: Option<f64>,
    /// Append the result to this CSV file (t_planck, t_over_tF, eta, eta_se, n_samples).
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub point: PointArgs,
    #[command(flatten)]
    pub mc: McArgs,
    /// Number of grid points.
    #[arg(long, default_value_t = 24)]
    pub points: usize,
    /// First grid time as a fraction of t_F.
    #[arg(long, default_value_t = 1e-3)]
    pub first_fraction: f64,
    /// Write the curve to this CSV file instead of stdout.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureName {
    RegionMap,
    PurityTime,
    PuritySigma,
    PurityMass,
}

impl From<FigureName> for FigureKind {
    fn from(f: FigureName) -> Self {
        match f {
            FigureName::RegionMap => FigureKind::RegionMap,
            FigureName::PurityTime => FigureKind::PurityTime,
            FigureName::PuritySigma => FigureKind::PuritySigma,
            FigureName::PurityMass => FigureKind::PurityMass,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FigureArgs {
    pub figure: FigureName,
    /// Cutoff lengths (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub lc: Option<Vec<f64>>,
    /// Values of m/M_C for per-mass curves (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub mu: Option<Vec<f64>>,
    /// Widths with unit suffix (comma separated), e.g. 30sb,60sb.
    #[arg(long, value_delimiter = ',')]
    pub sigma: Option<Vec<SigmaSpec>>,
    /// Grid along the figure's x axis (comma separated, increasing).
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[command(flatten)]
    pub mc: McArgs,
    /// Give each grid point its own derived seed instead of common random numbers.
    #[arg(long)]
    pub per_point_seeds: bool,
    /// Output directory. [default: .]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    /// Manifest (`.manifest` or `.manifest.json`).
    pub manifest: PathBuf,
    /// Output directory. [default: directory of the manifest]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Run only these checks (comma separated): msq, tf, rho, rqmc, quadrature.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
    /// Perturb every candidate value (negative control; must fail).
    #[arg(long)]
    pub inject_fault: bool,
    /// Print reports as JSON lines.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ConvertArgs {
    /// Mass: `<x>mp` or `<x>mc` (needs --lc).
    #[arg(long, allow_hyphen_values = true, conflicts_with_all = ["length", "time"], required_unless_present_any = ["length", "time"])]
    pub mass: Option<String>,
    /// Length: `<x>lp` or a bare number of Planck lengths.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "time")]
    pub length: Option<String>,
    /// Time: `<x>tp` or a bare number of Planck times.
    #[arg(long, allow_hyphen_values = true)]
    pub time: Option<String>,
    /// Cutoff length for `mc` masses.
    #[arg(long)]
    pub lc: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub lc_planck: Option<f64>,
    pub mass: Option<toml::Value>,
    pub sigma: Option<toml::Value>,
    pub seed: Option<u64>,
    pub samples: Option<u64>,
    pub target_se: Option<f64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn invalid(message: impl Into<String>) -> Self {
        Self { code: EXIT_INVALID, message: message.into() }
    }
}

impl From<ParamError> for CliError {
    fn from(e: ParamError) -> Self {
        Self::invalid(e.to_string())
    }
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        let code = match e {
            McError::RegionRefused { .. } | McError::BeyondWindow { .. } => EXIT_REFUSED,
            _ => EXIT_INVALID,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Mc(m) => m.into(),
            SweepError::Io { .. } => Self { code: EXIT_IO, message: e.to_string() },
            SweepError::Csv(ref c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => {
                Self { code: EXIT_IO, message: e.to_string() }
            }
            other => Self::invalid(other.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Mc(m) => m.into(),
            other => Self::invalid(other.to_string()),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError { code: EXIT_IO, message: format!("{}: {e}", path.display()) }
}

fn toml_scalar(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn load_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

struct Context {
    file: FileConfig,
    workers: usize,
}

impl Context {
    fn params(&self, p: &PointArgs) -> Result<ModelParams, CliError> {
        let l_c = p.lc.or(self.file.lc_planck).unwrap_or(1.0);
        let mass = p
            .mass
            .clone()
            .or_else(|| self.file.mass.as_ref().map(toml_scalar))
            .ok_or_else(|| CliError::invalid("missing --mass (e.g. 0.5mc or 1mp)"))?;
        let sigma = p
            .sigma
            .clone()
            .or_else(|| self.file.sigma.as_ref().map(toml_scalar))
            .ok_or_else(|| CliError::invalid("missing --sigma (e.g. 30sb, 2lb or 100lp)"))?;
        let mass = mass.parse::<MassSpec>()?.resolve(l_c)?;
        let sigma = resolve_sigma(&sigma.parse::<SigmaSpec>()?, l_c, mass)?;
        Ok(ModelParams::new(l_c, mass, sigma)?)
    }

    fn mc(&self, a: &McArgs) -> Result<McConfig, CliError> {
        let budget = match (a.samples, a.target_se) {
            (Some(n), _) => Budget::Fixed { n_samples: n },
            (None, Some(se)) => Budget::Target { target_se: se, n_cap: a.n_cap },
            (None, None) => match (self.file.samples, self.file.target_se) {
                (Some(n), _) => Budget::Fixed { n_samples: n },
                (None, se) => Budget::Target { target_se: se.unwrap_or(DEFAULT_TARGET_SE), n_cap: a.n_cap },
            },
        };
        let mut cfg = McConfig {
            seed: a.seed.or(self.file.seed).unwrap_or(0),
            budget,
            workers: self.workers,
            allow_outside_region: a.force,
            allow_beyond_tf: a.force,
            ..McConfig::default()
        };
        if let Budget::Target { n_cap, .. } = cfg.budget {
            cfg.chunk_size = cfg.chunk_size.min(n_cap.max(1) as usize);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

fn cmd_region(ctx: &Context, a: &PointArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let p = ctx.params(a)?;
    let label = classify_region(&p);
    let sb = sigma_b(&p);
    let tf = closedform::t_f(&p);
    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").ok();
    w(out, format!("region: {label}"));
    w(out, format!("l_c = {} [planck]  mass = {} [planck]  sigma = {} [planck]", p.l_c, p.mass, p.sigma));
    w(out, format!("m/M_C = {}  sigma/lambda_bar = {}", p.mu(), p.sigma / p.lambda_bar()));
    w(out, format!("sigma_B = {sb} [planck]"));
    match &tf {
        Ok(t) => w(out, format!("t_F = {t} [planck]")),
        Err(e) => w(out, format!("t_F unavailable: {e}")),
    };
    w(
        out,
        format!(
            "row: region={label},l_c={},mass={},sigma={},sigma_b={sb},t_f={}",
            p.l_c,
            p.mass,
            p.sigma,
            fmt_opt(tf.ok())
        ),
    );
    Ok(EXIT_OK)
}

fn print_estimate(out: &mut dyn Write, est: &PurityEstimate, t_f: Option<f64>) {
    let frac = t_f.map(|tf| est.t / tf);
    writeln!(out, "t = {} [planck]  t/t_F = {}", est.t, fmt_opt(frac)).ok();
    writeln!(out, "eta = {} ± {} (n = {})", est.eta, est.std_error, est.n).ok();
    if !est.converged {
        writeln!(out, "warning: SE target not reached within the sample cap; result is partial").ok();
    }
}

fn append_csv(path: &Path, rows: &[(&PurityEstimate, Option<f64>)]) -> Result<(), CliError> {
    let fresh = !path.exists();
    let file = fs::OpenOptions::new().create(true).append(true).open(path).map_err(|e| io_error(path, e))?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
    let io = |e: csv::Error| CliError { code: EXIT_IO, message: format!("{}: {e}", path.display()) };
    if fresh {
        w.write_record(["t_planck", "t_over_tF", "eta", "eta_se", "n_samples"]).map_err(io)?;
    }
    for (est, tf) in rows {
        let frac = tf.map(|tf| est.t / tf);
        w.write_record([
            format!("{}", est.t),
            fmt_opt(frac),
            format!("{}", est.eta),
            format!("{}", est.std_error),
            est.n.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

fn cmd_purity(ctx: &Context, a: &PurityArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let p = ctx.params(&a.point)?;
    let cfg = ctx.mc(&a.mc)?;
    let tf = closedform::t_f(&p).ok();
    let t = match (a.t, tf) {
        (Some(t), _) => t,
        (None, Some(tf)) => tf,
        (None, None) => {
            let label = classify_region(&p);
            return Err(McError::RegionRefused { label }.into());
        }
    };
    let est = mcpurity::estimate_purity(t, &p, &cfg)?;
    print_estimate(out, &est, tf);
    if let Some(path) = &a.csv {
        append_csv(path, &[(&est, tf)])?;
    }
    Ok(if est.converged { EXIT_OK } else { EXIT_SHORTFALL })
}

fn cmd_curve(ctx: &Context, a: &CurveArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let p = ctx.params(&a.point)?;
    let cfg = ctx.mc(&a.mc)?;
    if !(a.first_fraction > 0.0 && a.first_fraction <= 1.0) || a.points == 0 {
        return Err(CliError::invalid("need --points >= 1 and 0 < --first-fraction <= 1"));
    }
    let label = classify_region(&p);
    let tf = closedform::t_f(&p).map_err(|_| McError::RegionRefused { label })?;
    let grid = mcpurity::geometric_grid(tf, a.first_fraction, a.points);
    let curve = mcpurity::purity_curve(&grid, &p, &cfg)?;
    let rows: Vec<_> = curve.points.iter().map(|e| (e, Some(tf))).collect();
    match &a.csv {
        Some(path) => {
            if path.exists() {
                fs::remove_file(path).map_err(|e| io_error(path, e))?;
            }
            append_csv(path, &rows)?;
            writeln!(out, "wrote {}", path.display()).ok();
        }
        None => {
            writeln!(out, "# t in [planck]").ok();
            writeln!(out, "t_planck,t_over_tF,eta,eta_se,n_samples").ok();
            for e in &curve.points {
                writeln!(out, "{},{},{},{},{}", e.t, e.t / tf, e.eta, e.std_error, e.n).ok();
            }
        }
    }
    let short = curve.points.iter().any(|e| !e.converged);
    Ok(if short { EXIT_SHORTFALL } else { EXIT_OK })
}

fn cmd_figure(ctx: &Context, a: &FigureArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let mut spec = FigureSpec::defaults(a.figure.into());
    if let Some(v) = &a.lc {
        spec.l_c = v.clone();
    } else if let Some(lc) = ctx.file.lc_planck {
        spec.l_c = vec![lc];
    }
    if let Some(v) = &a.mu {
        spec.mu = v.clone();
    }
    if let Some(v) = &a.sigma {
        spec.sigma = v.clone();
    }
    match &a.grid {
        Some(v) => spec.grid = v.clone(),
        None if spec.figure == FigureKind::PuritySigma => spec.grid = sweep::default_sigma_grid(&spec.mu, &spec.l_c),
        None => {}
    }
    spec.mc = ctx.mc(&a.mc)?;
    spec.mc.per_point_seeds = a.per_point_seeds;
    spec.output_dir = a.out.clone().or_else(|| ctx.file.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    let run = sweep::run_figure(&spec)?;
    for f in &run.files {
        writeln!(out, "wrote {}", f.display()).ok();
    }
    writeln!(out, "manifest {}", run.manifest_path.display()).ok();
    writeln!(out, "wall time {:.3} s", run.manifest.wall_time_s).ok();
    if run.manifest.precision_shortfall() {
        writeln!(out, "warning: some points stopped at the sample cap before reaching the SE target").ok();
        return Ok(EXIT_SHORTFALL);
    }
    Ok(EXIT_OK)
}

fn cmd_rerun(ctx: &Context, a: &RerunArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let manifest = sweep::load_manifest(&a.manifest)?;
    let dir = a
        .out
        .clone()
        .unwrap_or_else(|| a.manifest.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(".")));
    let report = sweep::rerun(&manifest, &dir, Some(ctx.workers))?;
    for (name, same) in &report.eta_matches {
        writeln!(out, "{name}: eta {}", if *same { "identical" } else { "DIFFERS" }).ok();
    }
    Ok(if report.identical() { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

fn cmd_verify(ctx: &Context, a: &VerifyArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let mut opts = VerifyOptions { only: a.only.clone(), inject_fault: a.inject_fault, ..VerifyOptions::default() };
    opts.mc.workers = ctx.workers;
    let reports = mcpurity::with_workers(ctx.workers, || run_suite(&opts))?;
    let mut all = true;
    for r in &reports {
        all &= r.passed;
        if a.json {
            writeln!(out, "{}", serde_json::to_string(r).unwrap_or_default()).ok();
        } else {
            writeln!(
                out,
                "{} {:<28} reference={} candidate={} discrepancy={:.3e} tolerance={:.3e}",
                if r.passed { "PASS" } else { "FAIL" },
                r.name,
                r.reference_value,
                r.candidate_value,
                r.discrepancy,
                r.tolerance
            )
            .ok();
        }
    }
    if !a.json {
        writeln!(out, "{} of {} checks passed (available: {})", reports.iter().filter(|r| r.passed).count(), reports.len(), CHECKS.join(", ")).ok();
    }
    Ok(if all { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

fn parse_planck(input: &str, suffix: &str) -> Result<f64, CliError> {
    let s = input.trim();
    let number = s.strip_suffix(suffix).unwrap_or(s);
    number
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::invalid(format!("cannot parse `{input}` (expected a number, optionally suffixed `{suffix}`)")))
}

fn cmd_convert(a: &ConvertArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let (planck, kind) = if let Some(m) = &a.mass {
        let mass = if m.trim().ends_with("mc") {
            let lc = a.lc.ok_or_else(|| CliError::invalid("`mc` masses need --lc"))?;
            m.parse::<MassSpec>()?.resolve(lc)?
        } else {
            parse_planck(m, "mp")?
        };
        (mass, Quantity::Mass)
    } else if let Some(l) = &a.length {
        (parse_planck(l, "lp")?, Quantity::Length)
    } else if let Some(t) = &a.time {
        (parse_planck(t, "tp")?, Quantity::Time)
    } else {
        return Err(CliError::invalid("give one of --mass, --length, --time"));
    };
    let si = units::to_si(planck, kind);
    writeln!(out, "{planck} [planck] = {si}").ok();
    Ok(EXIT_OK)
}

/// Parses `args` and runs the command, writing to `out` and `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                write!(err, "{text}").ok();
            } else {
                write!(out, "{text}").ok();
            }
            return code;
        }
    };
    let result = load_config(cli.config.as_deref()).and_then(|file| {
        let workers = cli.workers.or(file.workers).unwrap_or(0);
        let ctx = Context { file, workers };
        match &cli.command {
            Command::Region(a) => cmd_region(&ctx, a, out),
            Command::Purity(a) => cmd_purity(&ctx, a, out),
            Command::Curve(a) => cmd_curve(&ctx, a, out),
            Command::Figure(a) => cmd_figure(&ctx, a, out),
            Command::Rerun(a) => cmd_rerun(&ctx, a, out),
            Command::Verify(a) => cmd_verify(&ctx, a, out),
            Command::Convert(a) => cmd_convert(a, out),
        }
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            writeln!(err, "error: {}", e.message).ok();
            e.code
        }
    }
}
