//! Figure tables: region boundaries, η against time, final purity against
//! wavepacket width and against mass. Each run writes CSV files plus a
//! manifest (flat `key=value` text and a JSON mirror) from which the tables
//! can be regenerated bit for bit.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::closedform::{self, classify_region, RegionLabel};
use crate::mcpurity::{self, with_workers, Budget, McConfig, McError};
use crate::units::{resolve_sigma, ModelParams, ParamError, SigmaSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// σ_B/λ̄ at μ = 1, L_C = 1.
const SIGMA_B_COEFF: f64 = 2.598_076_211_353_316; // 3√3/2

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Mc(#[from] McError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("manifest was written by version {found}, this is {expected}; refusing to rerun because results are only reproducible within one version")]
    VersionMismatch { found: String, expected: String },
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("manifest is missing field `{0}`")]
    MissingField(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SweepError + '_ {
    move |source| SweepError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureKind {
    RegionMap,
    PurityTime,
    PuritySigma,
    PurityMass,
}

impl FigureKind {
    pub const ALL: [FigureKind; 4] = [Self::RegionMap, Self::PurityTime, Self::PuritySigma, Self::PurityMass];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::RegionMap => "region_map",
            Self::PurityTime => "purity_time",
            Self::PuritySigma => "purity_sigma",
            Self::PurityMass => "purity_mass",
        }
    }

    /// Meaning of the grid values.
    pub fn grid_axis(self) -> &'static str {
        match self {
            Self::RegionMap | Self::PurityMass => "m/M_C",
            Self::PurityTime => "t/t_F",
            Self::PuritySigma => "sigma/lambda_bar",
        }
    }
}

impl fmt::Display for FigureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FigureKind {
    type Err = SweepError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| SweepError::Manifest(format!("unknown figure `{s}`")))
    }
}

/// What to compute. Which lists matter depends on the figure:
///
/// | figure       | grid     | files per          | rows per file    |
/// |--------------|----------|--------------------|------------------|
/// | region_map   | μ        | L_C                | curve × μ        |
/// | purity_time  | t/t_F    | L_C × μ × σ        | t                |
/// | purity_sigma | σ/λ̄     | L_C × μ            | σ/λ̄             |
/// | purity_mass  | μ        | σ                  | L_C × μ          |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureSpec {
    pub figure: FigureKind,
    pub l_c: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<SigmaSpec>,
    pub grid: Vec<f64>,
    pub mc: McConfig,
    pub output_dir: PathBuf,
}

fn geometric(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let step = (hi / lo).ln() / (count - 1) as f64;
    let mut v: Vec<f64> = (0..count).map(|i| lo * (step * i as f64).exp()).collect();
    v[count - 1] = hi;
    v
}

fn sigma_b_over_lambda(mu: f64, l_c: f64) -> f64 {
    SIGMA_B_COEFF * l_c * l_c / (mu * mu)
}

/// Lower edge of Region II in σ/λ̄ for given μ, L_C.
pub fn region_two_floor(mu: f64, l_c: f64) -> f64 {
    sigma_b_over_lambda(mu, l_c).max(mu).max(0.5)
}

/// Shared σ/λ̄ grid: 16 geometric points from just above the lowest Region II
/// edge among the curves to ten times the highest one.
pub fn default_sigma_grid(mu: &[f64], l_c: &[f64]) -> Vec<f64> {
    let floors: Vec<f64> = l_c.iter().flat_map(|&l| mu.iter().map(move |&m| region_two_floor(m, l))).collect();
    let lo = floors.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = floors.iter().copied().fold(0.0, f64::max);
    geometric(1.01 * lo, 10.0 * hi, 16)
}

impl FigureSpec {
    /// Defaults that reproduce the published figure.
    pub fn defaults(figure: FigureKind) -> Self {
        let sb = |k: f64| SigmaSpec::sigma_b(k).expect("positive multiple");
        let (l_c, mu, sigma, grid) = match figure {
            FigureKind::RegionMap => (vec![1.0], vec![], vec![], geometric(0.05, 1.0, 20)),
            FigureKind::PurityTime => {
                (vec![1.0], vec![0.5], vec![sb(30.0), sb(60.0)], mcpurity::geometric_grid(1.0, 1e-3, 24))
            }
            FigureKind::PuritySigma => {
                let mu = vec![0.5, 1.0];
                let grid = default_sigma_grid(&mu, &[1.0]);
                (vec![1.0], mu, vec![], grid)
            }
            FigureKind::PurityMass => {
                (vec![1.0, 0.5], vec![], vec![sb(30.0)], (1..=10).map(|i| i as f64 / 10.0).collect())
            }
        };
        Self { figure, l_c, mu, sigma, grid, mc: McConfig::default(), output_dir: PathBuf::from(".") }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let check = |name: &str, v: &[f64], increasing: bool| -> Result<(), SweepError> {
            if v.is_empty() {
                return Err(SweepError::InvalidGrid(format!("{name} must be non-empty")));
            }
            if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(SweepError::InvalidGrid(format!("{name} values must be finite and > 0")));
            }
            if increasing && v.windows(2).any(|w| w[1] <= w[0]) {
                return Err(SweepError::InvalidGrid(format!("{name} must be strictly increasing")));
            }
            Ok(())
        };
        check("grid", &self.grid, true)?;
        check("l_c", &self.l_c, false)?;
        match self.figure {
            FigureKind::RegionMap => {}
            FigureKind::PurityTime => {
                check("mu", &self.mu, false)?;
                if self.sigma.is_empty() {
                    return Err(SweepError::InvalidGrid("sigma list must be non-empty".into()));
                }
                if !self.mc.allow_beyond_tf && self.grid.iter().any(|&x| x > 1.0) {
                    return Err(SweepError::InvalidGrid("t/t_F values must be <= 1 unless beyond-window evaluation is allowed".into()));
                }
            }
            FigureKind::PuritySigma => check("mu", &self.mu, false)?,
            FigureKind::PurityMass => {
                if self.sigma.is_empty() {
                    return Err(SweepError::InvalidGrid("sigma list must be non-empty".into()));
                }
            }
        }
        self.mc.validate()?;
        Ok(())
    }
}

/// One evaluated (or classified) grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub file: String,
    pub x: f64,
    pub l_c: f64,
    pub mass: f64,
    pub sigma: f64,
    pub region: RegionLabel,
    pub t: Option<f64>,
    pub t_f: Option<f64>,
    pub seed: u64,
    pub eta: Option<f64>,
    pub eta_se: Option<f64>,
    pub n: u64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    pub sha256: String,
    /// Hash of the η column text alone.
    pub eta_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub spec: FigureSpec,
    pub outputs: Vec<OutputFile>,
    pub points: Vec<PointRecord>,
    pub wall_time_s: f64,
    pub created_unix: u64,
}

impl RunManifest {
    /// True if any point stopped at the sample cap before its SE target.
    pub fn precision_shortfall(&self) -> bool {
        self.points.iter().any(|p| p.eta.is_some() && !p.converged)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureRun {
    pub files: Vec<PathBuf>,
    pub manifest_path: PathBuf,
    pub manifest: RunManifest,
}

struct Task {
    file: String,
    x: f64,
    params: ModelParams,
    t_fraction: Option<f64>,
}

struct Table {
    name: String,
    header: &'static [&'static str],
    rows: Vec<Vec<String>>,
    eta_column: usize,
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn tag(x: f64) -> String {
    num(x).replace('.', "p")
}

fn params_for_mu(mu: f64, l_c: f64, sigma: f64) -> Result<ModelParams, ParamError> {
    ModelParams::new(l_c, mu / l_c, sigma)
}

fn build_tasks(spec: &FigureSpec) -> Result<Vec<Task>, SweepError> {
    let mut tasks = Vec::new();
    match spec.figure {
        FigureKind::RegionMap => {}
        FigureKind::PurityTime => {
            for &l_c in &spec.l_c {
                for &mu in &spec.mu {
                    for s in &spec.sigma {
                        let sigma = resolve_sigma(s, l_c, mu / l_c)?;
                        let params = params_for_mu(mu, l_c, sigma)?;
                        let file = format!("purity_time_lc{}_mu{}_sigma{}.csv", tag(l_c), tag(mu), tag_sigma(s));
                        for &frac in &spec.grid {
                            tasks.push(Task { file: file.clone(), x: frac, params, t_fraction: Some(frac) });
                        }
                    }
                }
            }
        }
        FigureKind::PuritySigma => {
            for &l_c in &spec.l_c {
                for &mu in &spec.mu {
                    let file = format!("purity_sigma_lc{}_mu{}.csv", tag(l_c), tag(mu));
                    let lambda_bar = l_c / mu;
                    for &x in &spec.grid {
                        let params = params_for_mu(mu, l_c, x * lambda_bar)?;
                        tasks.push(Task { file: file.clone(), x, params, t_fraction: Some(1.0) });
                    }
                }
            }
        }
        FigureKind::PurityMass => {
            for s in &spec.sigma {
                let file = format!("purity_mass_sigma{}.csv", tag_sigma(s));
                for &l_c in &spec.l_c {
                    for &mu in &spec.grid {
                        let sigma = resolve_sigma(s, l_c, mu / l_c)?;
                        let params = params_for_mu(mu, l_c, sigma)?;
                        tasks.push(Task { file: file.clone(), x: mu, params, t_fraction: Some(1.0) });
                    }
                }
            }
        }
    }
    Ok(tasks)
}

fn tag_sigma(s: &SigmaSpec) -> String {
    tag_str(&s.to_string())
}

fn tag_str(s: &str) -> String {
    s.replace('.', "p")
}

fn evaluate(task: &Task, index: usize, mc: &McConfig) -> Result<PointRecord, McError> {
    let region = classify_region(&task.params);
    let t_f = closedform::t_f(&task.params).ok();
    let mut cfg = *mc;
    if mc.per_point_seeds {
        cfg.seed = mcpurity::point_seed(mc.seed, index as u64);
    }
    let mut rec = PointRecord {
        file: task.file.clone(),
        x: task.x,
        l_c: task.params.l_c,
        mass: task.params.mass,
        sigma: task.params.sigma,
        region,
        t: None,
        t_f,
        seed: cfg.seed,
        eta: None,
        eta_se: None,
        n: 0,
        converged: true,
    };
    let (Some(frac), Some(t_f)) = (task.t_fraction, t_f) else {
        return Ok(rec);
    };
    if !region.is_allowed() && !mc.allow_outside_region {
        return Ok(rec);
    }
    let t = frac * t_f;
    let est = mcpurity::estimate_purity(t, &task.params, &cfg)?;
    rec.t = Some(t);
    rec.eta = Some(est.eta);
    rec.eta_se = Some(est.std_error);
    rec.n = est.n;
    rec.converged = est.converged;
    Ok(rec)
}

fn region_map_table(spec: &FigureSpec, l_c: f64) -> Table {
    let mut rows = Vec::new();
    let curves: [(&str, &dyn Fn(f64) -> f64); 3] = [
        ("hatched", &|mu| mu),
        ("quantum_minimum", &|_| 0.5),
        ("sigma_b", &|mu| sigma_b_over_lambda(mu, l_c)),
    ];
    for (name, f) in curves {
        for &mu in &spec.grid {
            rows.push(vec![name.to_string(), num(mu), num(f(mu))]);
        }
    }
    Table {
        name: format!("region_map_lc{}.csv", tag(l_c)),
        header: &["curve", "m_over_mc", "sigma_over_lambda"],
        rows,
        eta_column: usize::MAX,
    }
}

fn tables_from_records(spec: &FigureSpec, records: &[PointRecord]) -> Vec<Table> {
    let mut order: Vec<String> = Vec::new();
    let mut grouped: BTreeMap<String, Vec<&PointRecord>> = BTreeMap::new();
    for r in records {
        if !grouped.contains_key(&r.file) {
            order.push(r.file.clone());
        }
        grouped.entry(r.file.clone()).or_default().push(r);
    }
    order
        .into_iter()
        .map(|name| {
            let recs = &grouped[&name];
            let (header, eta_column): (&'static [&'static str], usize) = match spec.figure {
                FigureKind::PurityTime => (&["t_planck", "t_over_tF", "eta", "eta_se", "n_samples"], 2),
                FigureKind::PuritySigma => {
                    (&["sigma_over_lambda", "sigma_planck", "tF_planck", "eta_F", "eta_se", "region"], 3)
                }
                FigureKind::PurityMass => {
                    (&["m_over_mc", "lc_planck", "sigma_planck", "tF_planck", "eta_F", "eta_se"], 4)
                }
                FigureKind::RegionMap => unreachable!("region map has no evaluated points"),
            };
            let rows = recs
                .iter()
                .map(|r| match spec.figure {
                    FigureKind::PurityTime => {
                        vec![opt(r.t), num(r.x), opt(r.eta), opt(r.eta_se), r.n.to_string()]
                    }
                    FigureKind::PuritySigma => vec![
                        num(r.x),
                        num(r.sigma),
                        opt(r.t_f),
                        opt(r.eta),
                        opt(r.eta_se),
                        r.region.as_str().to_string(),
                    ],
                    _ => vec![num(r.x), num(r.l_c), num(r.sigma), opt(r.t_f), opt(r.eta), opt(r.eta_se)],
                })
                .collect();
            Table { name, header, rows, eta_column }
        })
        .collect()
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn render(table: &Table) -> Result<(Vec<u8>, String), SweepError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| SweepError::Manifest(e.to_string()))?;
    let eta_text: String = table
        .rows
        .iter()
        .filter_map(|r| r.get(table.eta_column))
        .map(|s| format!("{s}\n"))
        .collect();
    Ok((bytes, sha256_hex(eta_text.as_bytes())))
}

/// Tables and point records for `spec`, without touching the file system.
fn compute(spec: &FigureSpec) -> Result<(Vec<Table>, Vec<PointRecord>), SweepError> {
    spec.validate()?;
    if spec.figure == FigureKind::RegionMap {
        return Ok((spec.l_c.iter().map(|&l| region_map_table(spec, l)).collect(), Vec::new()));
    }
    let tasks = build_tasks(spec)?;
    if spec.figure == FigureKind::PurityTime {
        // A time curve needs an evolution window.
        for task in &tasks {
            let region = classify_region(&task.params);
            if !region.is_allowed() && !spec.mc.allow_outside_region {
                return Err(McError::RegionRefused { label: region }.into());
            }
            closedform::t_f(&task.params).map_err(McError::from)?;
        }
    }
    let records: Vec<PointRecord> = with_workers(spec.mc.workers, || {
        tasks.par_iter().enumerate().map(|(i, task)| evaluate(task, i, &spec.mc)).collect::<Result<Vec<_>, _>>()
    })?;
    Ok((tables_from_records(spec, &records), records))
}

fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<(), SweepError> {
    fs::write(path, to_flat(manifest)).map_err(io_err(path))?;
    let json_path = json_mirror(path);
    let json = serde_json::to_string_pretty(manifest).map_err(|e| SweepError::Manifest(e.to_string()))?;
    fs::write(&json_path, json).map_err(io_err(&json_path))
}

fn json_mirror(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn write_tables(dir: &Path, tables: &[Table]) -> Result<(Vec<PathBuf>, Vec<OutputFile>), SweepError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut paths = Vec::new();
    let mut outputs = Vec::new();
    for table in tables {
        let (bytes, eta_sha256) = render(table)?;
        let path = dir.join(&table.name);
        fs::write(&path, &bytes).map_err(io_err(&path))?;
        outputs.push(OutputFile { name: table.name.clone(), sha256: sha256_hex(&bytes), eta_sha256 });
        paths.push(path);
    }
    Ok((paths, outputs))
}

/// Evaluates the figure and writes its CSV files and manifest into
/// `spec.output_dir`.
pub fn run_figure(spec: &FigureSpec) -> Result<FigureRun, SweepError> {
    let start = Instant::now();
    let (tables, points) = compute(spec)?;
    let (files, outputs) = write_tables(&spec.output_dir, &tables)?;
    let manifest = RunManifest {
        version: VERSION.to_string(),
        spec: spec.clone(),
        outputs,
        points,
        wall_time_s: start.elapsed().as_secs_f64(),
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
    };
    let manifest_path = spec.output_dir.join(format!("{}.manifest", spec.figure));
    write_manifest(&manifest_path, &manifest)?;
    Ok(FigureRun { files, manifest_path, manifest })
}

/// Per-file comparison of a rerun against its manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct RerunReport {
    pub files: Vec<PathBuf>,
    /// (file name, η column identical)
    pub eta_matches: Vec<(String, bool)>,
}

impl RerunReport {
    pub fn identical(&self) -> bool {
        self.eta_matches.iter().all(|(_, ok)| *ok)
    }
}

/// Regenerates the tables described by `manifest` into `dir`, optionally with
/// a different worker count, and compares η columns by hash.
pub fn rerun(manifest: &RunManifest, dir: &Path, workers: Option<usize>) -> Result<RerunReport, SweepError> {
    if manifest.version != VERSION {
        return Err(SweepError::VersionMismatch { found: manifest.version.clone(), expected: VERSION.to_string() });
    }
    let mut spec = manifest.spec.clone();
    spec.output_dir = dir.to_path_buf();
    if let Some(w) = workers {
        spec.mc.workers = w;
    }
    let (tables, _) = compute(&spec)?;
    let (files, outputs) = write_tables(dir, &tables)?;
    let eta_matches = outputs
        .iter()
        .map(|o| {
            let same = manifest.outputs.iter().any(|m| m.name == o.name && m.eta_sha256 == o.eta_sha256);
            (o.name.clone(), same)
        })
        .collect();
    Ok(RerunReport { files, eta_matches })
}

/// Reads a manifest, either the flat text form or its `.json` mirror.
pub fn load_manifest(path: &Path) -> Result<RunManifest, SweepError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| {
            let msg = e.to_string();
            match msg.strip_prefix("missing field `").and_then(|r| r.split('`').next()) {
                Some(field) => SweepError::MissingField(field.to_string()),
                None => SweepError::Manifest(msg),
            }
        })
    } else {
        from_flat(&text)
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn opt_field<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Flat `key=value` rendering, one key per line.
pub fn to_flat(m: &RunManifest) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        out.push_str(k);
        out.push('=');
        out.push_str(&v);
        out.push('\n');
    };
    let s = &m.spec;
    kv("version", m.version.clone());
    kv("figure", s.figure.to_string());
    kv("grid_axis", s.figure.grid_axis().to_string());
    kv("l_c", join(&s.l_c));
    kv("mu", join(&s.mu));
    kv("sigma", join(&s.sigma));
    kv("grid", join(&s.grid));
    kv("output_dir", s.output_dir.display().to_string());
    kv("mc.seed", s.mc.seed.to_string());
    match s.mc.budget {
        Budget::Fixed { n_samples } => {
            kv("mc.budget", "fixed".into());
            kv("mc.n_samples", n_samples.to_string());
        }
        Budget::Target { target_se, n_cap } => {
            kv("mc.budget", "target".into());
            kv("mc.target_se", target_se.to_string());
            kv("mc.n_cap", n_cap.to_string());
        }
    }
    kv("mc.chunk_size", s.mc.chunk_size.to_string());
    kv("mc.workers", s.mc.workers.to_string());
    kv("mc.antithetic", s.mc.antithetic.to_string());
    kv("mc.per_point_seeds", s.mc.per_point_seeds.to_string());
    kv("mc.allow_outside_region", s.mc.allow_outside_region.to_string());
    kv("mc.allow_beyond_tf", s.mc.allow_beyond_tf.to_string());
    kv("outputs", m.outputs.len().to_string());
    for (i, o) in m.outputs.iter().enumerate() {
        kv(&format!("output.{i}.name"), o.name.clone());
        kv(&format!("output.{i}.sha256"), o.sha256.clone());
        kv(&format!("output.{i}.eta_sha256"), o.eta_sha256.clone());
    }
    kv("points", m.points.len().to_string());
    for (i, p) in m.points.iter().enumerate() {
        let k = |f: &str| format!("point.{i}.{f}");
        kv(&k("file"), p.file.clone());
        kv(&k("x"), p.x.to_string());
        kv(&k("l_c"), p.l_c.to_string());
        kv(&k("mass"), p.mass.to_string());
        kv(&k("sigma"), p.sigma.to_string());
        kv(&k("region"), p.region.as_str().to_string());
        kv(&k("t"), opt_field(p.t));
        kv(&k("t_f"), opt_field(p.t_f));
        kv(&k("seed"), p.seed.to_string());
        kv(&k("eta"), opt_field(p.eta));
        kv(&k("eta_se"), opt_field(p.eta_se));
        kv(&k("n"), p.n.to_string());
        kv(&k("converged"), p.converged.to_string());
    }
    kv("wall_time_s", m.wall_time_s.to_string());
    kv("created_unix", m.created_unix.to_string());
    out
}

struct Flat(BTreeMap<String, String>);

impl Flat {
    fn raw(&self, key: &str) -> Result<&str, SweepError> {
        self.0.get(key).map(String::as_str).ok_or_else(|| SweepError::MissingField(key.to_string()))
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T, SweepError>
    where
        T::Err: fmt::Display,
    {
        let raw = self.raw(key)?;
        raw.parse().map_err(|e| SweepError::Manifest(format!("field `{key}` = `{raw}`: {e}")))
    }

    fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, SweepError>
    where
        T::Err: fmt::Display,
    {
        if self.raw(key)?.is_empty() {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, SweepError>
    where
        T::Err: fmt::Display,
    {
        let raw = self.raw(key)?;
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|s| s.parse().map_err(|e| SweepError::Manifest(format!("field `{key}` item `{s}`: {e}"))))
            .collect()
    }
}

fn parse_region(s: &str) -> Result<RegionLabel, SweepError> {
    [
        RegionLabel::BeyondCut,
        RegionLabel::Hatched,
        RegionLabel::BelowQuantumMinimum,
        RegionLabel::RegionI,
        RegionLabel::RegionII,
    ]
    .into_iter()
    .find(|l| l.as_str() == s)
    .ok_or_else(|| SweepError::Manifest(format!("unknown region label `{s}`")))
}

/// Parses the flat text form.
pub fn from_flat(text: &str) -> Result<RunManifest, SweepError> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| SweepError::Manifest(format!("line {}: expected key=value", lineno + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    let f = Flat(map);
    let budget = match f.raw("mc.budget")? {
        "fixed" => Budget::Fixed { n_samples: f.get("mc.n_samples")? },
        "target" => Budget::Target { target_se: f.get("mc.target_se")?, n_cap: f.get("mc.n_cap")? },
        other => return Err(SweepError::Manifest(format!("unknown budget `{other}`"))),
    };
    let mc = McConfig {
        seed: f.get("mc.seed")?,
        budget,
        chunk_size: f.get("mc.chunk_size")?,
        workers: f.get("mc.workers")?,
        antithetic: f.get("mc.antithetic")?,
        per_point_seeds: f.get("mc.per_point_seeds")?,
        allow_outside_region: f.get("mc.allow_outside_region")?,
        allow_beyond_tf: f.get("mc.allow_beyond_tf")?,
    };
    let spec = FigureSpec {
        figure: f.get("figure")?,
        l_c: f.list("l_c")?,
        mu: f.list("mu")?,
        sigma: f.list("sigma")?,
        grid: f.list("grid")?,
        mc,
        output_dir: PathBuf::from(f.raw("output_dir")?),
    };
    let n_out: usize = f.get("outputs")?;
    let outputs = (0..n_out)
        .map(|i| {
            Ok(OutputFile {
                name: f.get(&format!("output.{i}.name"))?,
                sha256: f.get(&format!("output.{i}.sha256"))?,
                eta_sha256: f.get(&format!("output.{i}.eta_sha256"))?,
            })
        })
        .collect::<Result<Vec<_>, SweepError>>()?;
    let n_pts: usize = f.get("points")?;
    let points = (0..n_pts)
        .map(|i| {
            let k = |s: &str| format!("point.{i}.{s}");
            Ok(PointRecord {
                file: f.get(&k("file"))?,
                x: f.get(&k("x"))?,
                l_c: f.get(&k("l_c"))?,
                mass: f.get(&k("mass"))?,
                sigma: f.get(&k("sigma"))?,
                region: parse_region(f.raw(&k("region"))?)?,
                t: f.opt(&k("t"))?,
                t_f: f.opt(&k("t_f"))?,
                seed: f.get(&k("seed"))?,
                eta: f.opt(&k("eta"))?,
                eta_se: f.opt(&k("eta_se"))?,
                n: f.get(&k("n"))?,
                converged: f.get(&k("converged"))?,
            })
        })
        .collect::<Result<Vec<_>, SweepError>>()?;
    Ok(RunManifest {
        version: f.get("version")?,
        spec,
        outputs,
        points,
        wall_time_s: f.get("wall_time_s")?,
        created_unix: f.get("created_unix")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(figure: FigureKind, dir: &Path) -> FigureSpec {
        let mut spec = FigureSpec::defaults(figure);
        spec.mc = McConfig::fixed(11, 4096);
        spec.mc.chunk_size = 1024;
        spec.output_dir = dir.to_path_buf();
        spec
    }

    #[test]
    fn region_map_boundary_has_slope_minus_two() {
        let dir = tempfile::tempdir().unwrap();
        let run = run_figure(&quick(FigureKind::RegionMap, dir.path())).unwrap();
        let mut rdr = csv::Reader::from_path(&run.files[0]).unwrap();
        let rows: Vec<(String, f64, f64)> = rdr.deserialize().map(|r| r.unwrap()).collect();
        let sb: Vec<_> = rows.iter().filter(|r| r.0 == "sigma_b").collect();
        assert_eq!(sb.len(), 20);
        for w in sb.windows(2) {
            let slope = (w[1].2 / w[0].2).ln() / (w[1].1 / w[0].1).ln();
            assert!((slope + 2.0).abs() < 1e-12, "slope {slope}");
        }
        assert!(rows.iter().any(|r| r.0 == "hatched") && rows.iter().any(|r| r.0 == "quantum_minimum"));
    }

    #[test]
    fn sigma_sweep_labels_points_below_region_two() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = quick(FigureKind::PuritySigma, dir.path());
        spec.grid = vec![3.0, 20.0];
        let run = run_figure(&spec).unwrap();
        assert_eq!(run.files.len(), 2);
        let half = run.manifest.points.iter().filter(|p| p.file.contains("mu0p5")).collect::<Vec<_>>();
        assert_eq!(half[0].region, RegionLabel::RegionI);
        assert!(half[0].eta.is_none());
        assert!(half[1].eta.is_some());
        let text = fs::read_to_string(&run.files[0]).unwrap();
        assert!(text.starts_with("sigma_over_lambda,sigma_planck,tF_planck,eta_F,eta_se,region\n"));
        assert!(text.contains(",,,RegionI\n"));
    }

    #[test]
    fn flat_manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = quick(FigureKind::PurityMass, dir.path());
        spec.grid = vec![0.5, 1.0];
        let run = run_figure(&spec).unwrap();
        let back = load_manifest(&run.manifest_path).unwrap();
        assert_eq!(back, run.manifest);
        let json = load_manifest(&json_mirror(&run.manifest_path)).unwrap();
        assert_eq!(json, run.manifest);
    }

    #[test]
    fn truncated_manifest_names_missing_field() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = quick(FigureKind::PurityMass, dir.path());
        spec.grid = vec![1.0];
        let run = run_figure(&spec).unwrap();
        let text = fs::read_to_string(&run.manifest_path).unwrap();
        let cut: String = text.lines().filter(|l| !l.starts_with("mc.seed=")).map(|l| format!("{l}\n")).collect();
        match from_flat(&cut) {
            Err(SweepError::MissingField(f)) => assert_eq!(f, "mc.seed"),
            other => panic!("{other:?}"),
        }
        let json = fs::read_to_string(json_mirror(&run.manifest_path)).unwrap();
        let mut value: serde_json::Value = serde_json::from_str(&json).unwrap();
        value.as_object_mut().unwrap().remove("points");
        let path = dir.path().join("cut.json");
        fs::write(&path, value.to_string()).unwrap();
        match load_manifest(&path) {
            Err(SweepError::MissingField(f)) => assert_eq!(f, "points"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rerun_refuses_other_version() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = quick(FigureKind::RegionMap, dir.path());
        spec.grid = vec![0.5, 1.0];
        let mut m = run_figure(&spec).unwrap().manifest;
        m.version = "0.0.0".into();
        assert!(matches!(rerun(&m, dir.path(), None), Err(SweepError::VersionMismatch { .. })));
    }

    #[test]
    fn invalid_grids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = quick(FigureKind::PurityMass, dir.path());
        spec.grid = vec![0.5, 0.5];
        assert!(matches!(run_figure(&spec), Err(SweepError::InvalidGrid(_))));
        spec.grid = vec![];
        assert!(matches!(run_figure(&spec), Err(SweepError::InvalidGrid(_))));
        let mut spec = quick(FigureKind::PurityTime, dir.path());
        spec.grid = vec![0.5, 2.0];
        assert!(matches!(run_figure(&spec), Err(SweepError::InvalidGrid(_))));
    }

    #[test]
    fn time_curve_outside_region_two_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = quick(FigureKind::PurityTime, dir.path());
        spec.sigma = vec![SigmaSpec::sigma_b(0.5).unwrap()];
        assert!(matches!(run_figure(&spec), Err(SweepError::Mc(McError::RegionRefused { .. }))));
    }

    #[test]
    fn defaults_cover_documented_grids() {
        let t = FigureSpec::defaults(FigureKind::PurityTime);
        assert_eq!(t.grid.len(), 24);
        assert_eq!(*t.grid.last().unwrap(), 1.0);
        let s = FigureSpec::defaults(FigureKind::PuritySigma);
        assert_eq!(s.grid.len(), 16);
        assert!((s.grid[0] - 1.01 * SIGMA_B_COEFF).abs() < 1e-12);
        assert!((s.grid[15] - 10.0 * 4.0 * SIGMA_B_COEFF).abs() < 1e-9);
        let m = FigureSpec::defaults(FigureKind::PurityMass);
        assert_eq!(m.grid.len(), 10);
        assert_eq!(m.l_c, vec![1.0, 0.5]);
        for k in FigureKind::ALL {
            FigureSpec::defaults(k).validate().unwrap();
            assert_eq!(k.as_str().replace('_', "-").parse::<FigureKind>().unwrap(), k);
        }
    }
}
