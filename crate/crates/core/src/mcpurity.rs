//! Monte-Carlo estimator of the purity η(t) = ∫∫ d³r d³r′ |ρ(r, r′, t)|².
//!
//! Writing out ρ·ρ* introduces two clone coordinates r̄, r̄′. The modulus of
//! the integrand is (2πσ²)⁻⁶·exp(−(r² + r′² + r̄² + r̄′²)/(2σ²)), which is
//! exactly the density of four independent 3-D normals with per-component
//! variance σ². Only the phases survive, so
//!
//! ```text
//! η(t) = E[exp(iφ)] = E[cos φ],   φ = m²·t·Δf,
//! Δf = 1/d(r,r̄) − 1/d(r′,r̄) − 1/d(r,r̄′) + 1/d(r′,r̄′)
//! ```
//!
//! with `d` the regularized distance. The estimator draws the four points,
//! averages `1 − cos φ = 2 sin²(φ/2)` (no cancellation for small φ) and reports
//! η = 1 − mean. Pairing each draw with its r ↔ r′ swap flips the sign of φ,
//! which cancels the sine channel exactly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closedform::{self, regularized_distance, sub, ClosedFormError, RegionLabel, Vec3};
use crate::rng::Stream;
use crate::summation::{pairwise_merge, ChunkStats};
use crate::units::{ModelParams, ParamError};

pub const DEFAULT_TARGET_SE: f64 = 1e-3;
pub const DEFAULT_N_CAP: u64 = 100_000_000;
pub const DEFAULT_CHUNK_SIZE: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    ClosedForm(#[from] ClosedFormError),
    #[error("parameter point is {label}, not RegionII (override to evaluate anyway)")]
    RegionRefused { label: RegionLabel },
    #[error("t = {t} lies beyond t_F = {t_f}; the potential-dominated model does not apply there (override to evaluate anyway)")]
    BeyondWindow { t: f64, t_f: f64 },
    #[error("invalid time {0}: must be finite and >= 0")]
    InvalidTime(f64),
    #[error("time grid must be non-empty and strictly increasing")]
    InvalidGrid,
    #[error("invalid Monte-Carlo configuration: {0}")]
    InvalidConfig(String),
}

/// Sample budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Fixed { n_samples: u64 },
    Target { target_se: f64, n_cap: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub seed: u64,
    pub budget: Budget,
    pub chunk_size: usize,
    /// Worker threads; 0 means all available. Never affects results.
    pub workers: usize,
    pub antithetic: bool,
    /// Each grid point of a curve gets its own derived seed instead of
    /// sharing one (common random numbers).
    pub per_point_seeds: bool,
    pub allow_outside_region: bool,
    pub allow_beyond_tf: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            budget: Budget::Target { target_se: DEFAULT_TARGET_SE, n_cap: DEFAULT_N_CAP },
            chunk_size: DEFAULT_CHUNK_SIZE,
            workers: 0,
            antithetic: true,
            per_point_seeds: false,
            allow_outside_region: false,
            allow_beyond_tf: false,
        }
    }
}

impl McConfig {
    pub fn fixed(seed: u64, n_samples: u64) -> Self {
        Self { seed, budget: Budget::Fixed { n_samples }, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), McError> {
        if self.chunk_size == 0 {
            return Err(McError::InvalidConfig("chunk_size must be >= 1".into()));
        }
        match self.budget {
            Budget::Fixed { n_samples: 0 } => {
                Err(McError::InvalidConfig("n_samples must be >= 1".into()))
            }
            Budget::Target { target_se, n_cap } => {
                if !(target_se.is_finite() && target_se > 0.0) {
                    Err(McError::InvalidConfig("target_se must be > 0".into()))
                } else if n_cap < self.chunk_size as u64 {
                    Err(McError::InvalidConfig("n_cap must be >= chunk_size".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PurityEstimate {
    pub t: f64,
    pub eta: f64,
    pub std_error: f64,
    /// 1 − η, accumulated directly.
    pub one_minus_eta: f64,
    pub n: u64,
    pub imag_part: f64,
    pub imag_se: f64,
    /// False when the sample cap was hit before the target standard error.
    pub converged: bool,
}

impl PurityEstimate {
    pub fn exact_unit(t: f64) -> Self {
        Self { t, eta: 1.0, std_error: 0.0, one_minus_eta: 0.0, n: 0, imag_part: 0.0, imag_se: 0.0, converged: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurityCurve {
    pub params: ModelParams,
    pub t_grid: Vec<f64>,
    pub points: Vec<PurityEstimate>,
}

/// Δf for the four points; antisymmetric under r ↔ r′ and under r̄ ↔ r̄′.
#[inline]
pub fn phase_delta(r: &Vec3, rp: &Vec3, rbar: &Vec3, rbarp: &Vec3, params: &ModelParams) -> f64 {
    let l = params.l_c;
    let a = 1.0 / regularized_distance(&sub(r, rbar), l);
    let b = 1.0 / regularized_distance(&sub(rp, rbar), l);
    let c = 1.0 / regularized_distance(&sub(r, rbarp), l);
    let d = 1.0 / regularized_distance(&sub(rp, rbarp), l);
    (a - b) - (c - d)
}

#[inline]
fn draw_points(stream: &mut Stream, sigma: f64) -> [Vec3; 4] {
    let mut pts = [[0.0; 3]; 4];
    for p in pts.iter_mut() {
        for x in p.iter_mut() {
            *x = sigma * stream.normal();
        }
    }
    pts
}

/// Runs `f` on a pool of `workers` threads unless already inside one.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    if workers == 0 || rayon::current_thread_index().is_some() {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

struct Accumulated {
    primary: ChunkStats,
    secondary: ChunkStats,
    converged: bool,
}

/// Per-sample kernel returning two channels.
trait SampleKernel: Sync {
    fn eval(&self, pts: &[Vec3; 4]) -> (f64, f64);
}

fn run_chunk<K: SampleKernel>(kernel: &K, seed: u64, chunk: u64, count: usize, sigma: f64) -> (ChunkStats, ChunkStats) {
    let mut stream = Stream::new(seed, chunk);
    let mut first = Vec::with_capacity(count);
    let mut second = Vec::with_capacity(count);
    for _ in 0..count {
        let pts = draw_points(&mut stream, sigma);
        let (a, b) = kernel.eval(&pts);
        first.push(a);
        second.push(b);
    }
    (ChunkStats::from_slice(&first), ChunkStats::from_slice(&second))
}

fn chunk_counts(total: u64, chunk_size: usize) -> Vec<usize> {
    let cs = chunk_size as u64;
    let full = total / cs;
    let rest = (total % cs) as usize;
    let mut v = vec![chunk_size; full as usize];
    if rest > 0 {
        v.push(rest);
    }
    v
}

/// Drives chunks to the budget. The chunk sequence and the stopping points
/// (after 1, 2, 4, … chunks) are independent of the worker count.
fn accumulate<K: SampleKernel>(
    kernel: &K,
    sigma: f64,
    cfg: &McConfig,
    relative_target: bool,
) -> Accumulated {
    let eval = |range: std::ops::Range<u64>, counts: &[usize]| -> Vec<(ChunkStats, ChunkStats)> {
        range
            .into_par_iter()
            .map(|c| run_chunk(kernel, cfg.seed, c, counts[c as usize], sigma))
            .collect()
    };
    with_workers(cfg.workers, || match cfg.budget {
        Budget::Fixed { n_samples } => {
            let counts = chunk_counts(n_samples, cfg.chunk_size);
            let res = eval(0..counts.len() as u64, &counts);
            let (a, b): (Vec<_>, Vec<_>) = res.into_iter().unzip();
            Accumulated { primary: pairwise_merge(&a), secondary: pairwise_merge(&b), converged: true }
        }
        Budget::Target { target_se, n_cap } => {
            let counts = chunk_counts(n_cap, cfg.chunk_size);
            let max_chunks = counts.len() as u64;
            let mut done: Vec<(ChunkStats, ChunkStats)> = Vec::new();
            let mut next = 1u64.min(max_chunks);
            loop {
                let start = done.len() as u64;
                done.extend(eval(start..next, &counts));
                let a: Vec<_> = done.iter().map(|x| x.0).collect();
                let primary = pairwise_merge(&a);
                let goal = if relative_target { target_se * primary.mean.abs() } else { target_se };
                let reached = primary.n >= 2 && primary.std_error() <= goal;
                if reached || next == max_chunks {
                    let b: Vec<_> = done.iter().map(|x| x.1).collect();
                    return Accumulated { primary, secondary: pairwise_merge(&b), converged: reached };
                }
                next = (next * 2).min(max_chunks);
            }
        }
    })
}

struct PurityKernel {
    params: ModelParams,
    coupling: f64,
    antithetic: bool,
}

impl SampleKernel for PurityKernel {
    #[inline]
    fn eval(&self, pts: &[Vec3; 4]) -> (f64, f64) {
        let [r, rp, rbar, rbarp] = pts;
        let phi = self.coupling * phase_delta(r, rp, rbar, rbarp, &self.params);
        let half = (0.5 * phi).sin();
        let loss = 2.0 * half * half;
        let imag = if self.antithetic {
            // The swapped partner has phase_delta exactly −Δf.
            let partner = self.coupling * phase_delta(rp, r, rbar, rbarp, &self.params);
            0.5 * (phi.sin() + partner.sin())
        } else {
            phi.sin()
        };
        (loss, imag)
    }
}

fn check_time(t: f64) -> Result<(), McError> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(McError::InvalidTime(t))
    }
}

fn enforce(params: &ModelParams, cfg: &McConfig) -> Result<Option<f64>, McError> {
    params.validate()?;
    cfg.validate()?;
    let label = closedform::classify_region(params);
    if !label.is_allowed() && !cfg.allow_outside_region {
        return Err(McError::RegionRefused { label });
    }
    Ok(closedform::t_f(params).ok())
}

fn check_window(t: f64, t_f: Option<f64>, cfg: &McConfig) -> Result<(), McError> {
    match t_f {
        Some(t_f) if t > t_f && !cfg.allow_beyond_tf => Err(McError::BeyondWindow { t, t_f }),
        _ => Ok(()),
    }
}

fn estimate_unchecked(t: f64, params: &ModelParams, cfg: &McConfig) -> PurityEstimate {
    if t == 0.0 {
        return PurityEstimate::exact_unit(0.0);
    }
    let kernel = PurityKernel { params: *params, coupling: params.mass * params.mass * t, antithetic: cfg.antithetic };
    let acc = accumulate(&kernel, params.sigma, cfg, false);
    PurityEstimate {
        t,
        eta: 1.0 - acc.primary.mean,
        std_error: acc.primary.std_error(),
        one_minus_eta: acc.primary.mean,
        n: acc.primary.n,
        imag_part: acc.secondary.mean,
        imag_se: acc.secondary.std_error(),
        converged: acc.converged,
    }
}

pub fn estimate_purity(t: f64, params: &ModelParams, cfg: &McConfig) -> Result<PurityEstimate, McError> {
    check_time(t)?;
    let t_f = enforce(params, cfg)?;
    check_window(t, t_f, cfg)?;
    Ok(estimate_unchecked(t, params, cfg))
}

/// Seed used for grid point `index` when per-point seeding is enabled.
pub fn point_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn purity_curve(t_grid: &[f64], params: &ModelParams, cfg: &McConfig) -> Result<PurityCurve, McError> {
    if t_grid.is_empty() || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(McError::InvalidGrid);
    }
    let t_f = enforce(params, cfg)?;
    for &t in t_grid {
        check_time(t)?;
        if t == 0.0 {
            return Err(McError::InvalidGrid);
        }
        check_window(t, t_f, cfg)?;
    }
    let points = t_grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mut point_cfg = *cfg;
            if cfg.per_point_seeds {
                point_cfg.seed = point_seed(cfg.seed, i as u64);
            }
            estimate_unchecked(t, params, &point_cfg)
        })
        .collect();
    Ok(PurityCurve { params: *params, t_grid: t_grid.to_vec(), points })
}

/// `count` geometrically spaced times ending at `t_end`, starting at `t_end·first_fraction`.
pub fn geometric_grid(t_end: f64, first_fraction: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![t_end],
        _ => {
            let ratio = first_fraction.ln() / (count - 1) as f64;
            let mut grid: Vec<f64> = (0..count)
                .map(|i| t_end * (ratio * (count - 1 - i) as f64).exp())
                .collect();
            grid[count - 1] = t_end;
            grid
        }
    }
}

/// η_F = η(t_F).
pub fn final_purity(params: &ModelParams, cfg: &McConfig) -> Result<PurityEstimate, McError> {
    let t_f = closedform::t_f(params)?;
    estimate_purity(t_f, params, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n: u64,
}

struct ShortTimeKernel {
    params: ModelParams,
}

impl SampleKernel for ShortTimeKernel {
    #[inline]
    fn eval(&self, pts: &[Vec3; 4]) -> (f64, f64) {
        let [r, rp, rbar, rbarp] = pts;
        let df = phase_delta(r, rp, rbar, rbarp, &self.params);
        (df * df, 0.0)
    }
}

/// c₂ in 1 − η(t) ≈ c₂t², estimated as m⁴·E[Δf²]/2. A target budget is
/// read as a relative standard error.
pub fn short_time_coefficient(params: &ModelParams, cfg: &McConfig) -> Result<CoefficientEstimate, McError> {
    enforce(params, cfg)?;
    let acc = accumulate(&ShortTimeKernel { params: *params }, params.sigma, cfg, true);
    let scale = 0.5 * params.mass.powi(4);
    Ok(CoefficientEstimate {
        value: scale * acc.primary.mean,
        std_error: scale * acc.primary.std_error(),
        n: acc.primary.n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedform::sigma_b_for_mass;
    use proptest::prelude::*;

    fn reference() -> ModelParams {
        ModelParams::new(1.0, 0.5, 30.0 * sigma_b_for_mass(0.5)).unwrap()
    }

    #[test]
    fn zero_time_is_exact() {
        let est = estimate_purity(0.0, &reference(), &McConfig::default()).unwrap();
        assert_eq!(est.eta, 1.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn antithetic_sine_channel_vanishes() {
        let params = reference();
        let t = closedform::t_f(&params).unwrap();
        let est = estimate_purity(t, &params, &McConfig::fixed(3, 20_000)).unwrap();
        assert_eq!(est.imag_part, 0.0);
        assert_eq!(est.imag_se, 0.0);
        assert!(est.eta < 1.0 && est.eta > 0.9);
        assert!(est.std_error <= 1.0 / (est.n as f64).sqrt());
    }

    #[test]
    fn sine_channel_without_pairing_is_noise() {
        let params = reference();
        let t = closedform::t_f(&params).unwrap();
        let mut inside = 0;
        for seed in 0..20 {
            let cfg = McConfig { antithetic: false, ..McConfig::fixed(seed, 5_000) };
            let est = estimate_purity(t, &params, &cfg).unwrap();
            assert!(est.imag_se > 0.0);
            if est.imag_part.abs() <= 3.0 * est.imag_se {
                inside += 1;
            }
        }
        assert!(inside >= 18, "{inside}/20 within 3 SE");
    }

    #[test]
    fn worker_count_does_not_change_result() {
        let params = reference();
        let t = closedform::t_f(&params).unwrap();
        let base = McConfig { chunk_size: 1000, ..McConfig::fixed(11, 7_500) };
        let one = estimate_purity(t, &params, &McConfig { workers: 1, ..base }).unwrap();
        let four = estimate_purity(t, &params, &McConfig { workers: 4, ..base }).unwrap();
        assert_eq!(one.eta.to_bits(), four.eta.to_bits());
        assert_eq!(one.std_error.to_bits(), four.std_error.to_bits());
    }

    #[test]
    fn target_budget_stops() {
        let params = reference();
        let t = closedform::t_f(&params).unwrap();
        let cfg = McConfig {
            chunk_size: 4096,
            budget: Budget::Target { target_se: 2e-3, n_cap: 1 << 20 },
            ..McConfig::default()
        };
        let est = estimate_purity(t, &params, &cfg).unwrap();
        assert!(est.converged);
        assert!(est.std_error <= 2e-3);
        let tight = McConfig { budget: Budget::Target { target_se: 1e-7, n_cap: 8192 }, ..cfg };
        let partial = estimate_purity(t, &params, &tight).unwrap();
        assert!(!partial.converged);
        assert_eq!(partial.n, 8192);
    }

    #[test]
    fn refusals() {
        let outside = ModelParams::new(1.0, 0.5, 10.0).unwrap();
        assert!(matches!(
            estimate_purity(1.0, &outside, &McConfig::default()),
            Err(McError::RegionRefused { label: RegionLabel::RegionI })
        ));
        let params = reference();
        let t_f = closedform::t_f(&params).unwrap();
        assert!(matches!(
            estimate_purity(2.0 * t_f, &params, &McConfig::default()),
            Err(McError::BeyondWindow { .. })
        ));
        let cfg = McConfig { allow_beyond_tf: true, ..McConfig::fixed(1, 1000) };
        assert!(estimate_purity(2.0 * t_f, &params, &cfg).is_ok());
        assert!(estimate_purity(-1.0, &params, &cfg).is_err());
        assert!(matches!(final_purity(&outside, &cfg), Err(McError::ClosedForm(_))));
        assert!(McConfig { chunk_size: 0, ..McConfig::default() }.validate().is_err());
    }

    #[test]
    fn curve_validation() {
        let params = reference();
        let t_f = closedform::t_f(&params).unwrap();
        let cfg = McConfig::fixed(1, 2000);
        assert!(purity_curve(&[], &params, &cfg).is_err());
        assert!(purity_curve(&[2.0, 1.0], &params, &cfg).is_err());
        assert!(purity_curve(&[0.5 * t_f, 1.1 * t_f], &params, &cfg).is_err());
        let grid = geometric_grid(t_f, 1e-3, 24);
        assert_eq!(grid.len(), 24);
        assert_eq!(*grid.last().unwrap(), t_f);
        let curve = purity_curve(&grid, &params, &cfg).unwrap();
        assert_eq!(curve.points.len(), 24);
        for p in &curve.points {
            assert!(p.eta <= 1.0 + 3.0 * p.std_error);
        }
    }

    #[test]
    fn short_time_mass_scaling() {
        let light = reference();
        let heavy = ModelParams::new(1.0, 1.0, light.sigma).unwrap();
        let cfg = McConfig::fixed(5, 50_000);
        let a = short_time_coefficient(&light, &cfg).unwrap();
        let b = short_time_coefficient(&heavy, &cfg).unwrap();
        // Same points, so the ratio is exact up to rounding.
        assert!((b.value / a.value - 16.0).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn phase_delta_symmetries(x in prop::array::uniform12(-100.0f64..100.0)) {
            let params = reference();
            let r = [x[0], x[1], x[2]];
            let rp = [x[3], x[4], x[5]];
            let rb = [x[6], x[7], x[8]];
            let rbp = [x[9], x[10], x[11]];
            let v = phase_delta(&r, &rp, &rb, &rbp, &params);
            prop_assert_eq!(phase_delta(&rp, &r, &rb, &rbp, &params), -v);
            prop_assert_eq!(phase_delta(&r, &rp, &rbp, &rb, &params), -v);
            prop_assert_eq!(phase_delta(&r, &r, &rb, &rbp, &params), 0.0);
            prop_assert_eq!(phase_delta(&r, &rp, &rb, &rb, &params), 0.0);
            let l = params.l_c;
            let direct = 1.0 / regularized_distance(&sub(&r, &rb), l)
                - 1.0 / regularized_distance(&sub(&rp, &rb), l)
                - 1.0 / regularized_distance(&sub(&r, &rbp), l)
                + 1.0 / regularized_distance(&sub(&rp, &rbp), l);
            prop_assert!((v - direct).abs() <= 1e-15);
        }
    }
}
