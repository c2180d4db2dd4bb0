//! Analytic kernels of the particle–clone model.
//!
//! All expressions are written in Planck units (ħ = c = G = 1). The
//! ħ-explicit forms map term by term:
//!
//! | quantity | ħ-explicit | Planck |
//! |---|---|---|
//! | clone potential | −ħ²/(λ̄²·d) | −m²/d |
//! | phase | ħt/(λ̄²·d) | m²t/d |
//! | ⟨p²⟩ | (3ħ²/4σ²){1 + ħ²t²B/(96λ̄⁴σ̃⁵L_C²)} | (3/4σ²){1 + t²B/(96λ̄⁴σ̃⁵L_C²)} |
//! | K | (λ̄/ħ)⟨p²⟩ | λ̄⟨p²⟩ |
//! | \|U\| | ħ²/(λ̄²√⟨r²⟩) | 1/(λ̄²√3σ) |
//! | σ_B | λ̄(3√3/2)(L_C²/ħ)/(m/M_C)² | (3√3/2)λ̄³ |

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::erfcx::erfcx;
use crate::units::ModelParams;

/// K/|U| level at which the potential-dominated window closes.
pub const KU_THRESHOLD: f64 = 0.5;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClosedFormError {
    #[error("sigma_tilde must be finite and > 0, got {0}")]
    InvalidSigmaTilde(f64),
    #[error("no Region II evolution window: sigma = {sigma} <= sigma_B = {sigma_b}")]
    NoEvolutionWindow { sigma: f64, sigma_b: f64 },
}

pub type Vec3 = [f64; 3];

#[inline]
pub fn norm_sq(v: &Vec3) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

#[inline]
pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// `sqrt(|dx|² + l_c²)`; never smaller than `l_c`.
#[inline]
pub fn regularized_distance(dx: &Vec3, l_c: f64) -> f64 {
    (norm_sq(dx) + l_c * l_c).sqrt()
}

/// Phase θ = m²·t/d(r − r̄) accumulated by the pair amplitude.
pub fn phase(r: &Vec3, rbar: &Vec3, t: f64, params: &ModelParams) -> f64 {
    let d = regularized_distance(&sub(r, rbar), params.l_c);
    params.mass * params.mass * t / d
}

/// Pair amplitude Ψ(r, r̄, t) held in polar form.
///
/// The modulus depends only on the initial Gaussian; time enters through the
/// phase alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairAmplitude {
    pub modulus: f64,
    pub phase: f64,
}

impl PairAmplitude {
    pub fn to_complex(self) -> Complex64 {
        Complex64::from_polar(self.modulus, self.phase)
    }
}

pub fn pair_wavefunction(r: &Vec3, rbar: &Vec3, t: f64, params: &ModelParams) -> PairAmplitude {
    let s2 = params.sigma * params.sigma;
    let norm = (2.0 * PI * s2).powf(-1.5);
    PairAmplitude {
        modulus: norm * (-(norm_sq(r) + norm_sq(rbar)) / (4.0 * s2)).exp(),
        phase: phase(r, rbar, t, params),
    }
}

/// B(σ̃) = √π(1 + 12σ̃² + 12σ̃⁴)·erfcx(1/(2σ̃)) − 2σ̃(1 + 10σ̃²).
pub fn bracket_b(sigma_tilde: f64) -> Result<f64, ClosedFormError> {
    if !(sigma_tilde.is_finite() && sigma_tilde > 0.0) {
        return Err(ClosedFormError::InvalidSigmaTilde(sigma_tilde));
    }
    let s2 = sigma_tilde * sigma_tilde;
    let poly = 1.0 + 12.0 * s2 + 12.0 * s2 * s2;
    let tail = 2.0 * sigma_tilde * (1.0 + 10.0 * s2);
    Ok(PI.sqrt() * poly * erfcx(0.5 / sigma_tilde) - tail)
}

fn bracket_for(params: &ModelParams) -> f64 {
    // ModelParams guarantees σ̃ > 0.
    bracket_b(params.sigma / params.l_c).expect("validated params give a positive sigma_tilde")
}

/// ⟨r²⟩ = 3σ²; constant in time.
pub fn msq_position(params: &ModelParams) -> f64 {
    3.0 * params.sigma * params.sigma
}

/// ⟨p²⟩(t) in Planck units.
pub fn msq_momentum(t: f64, params: &ModelParams) -> f64 {
    let lb = params.lambda_bar();
    let st = params.sigma / params.l_c;
    let growth = t * t * bracket_for(params) / (96.0 * lb.powi(4) * st.powi(5) * params.l_c * params.l_c);
    0.75 / (params.sigma * params.sigma) * (1.0 + growth)
}

/// K/|U| with K = λ̄⟨p²⟩ (particle plus clone) and |U| = 1/(λ̄²√⟨r²⟩).
pub fn kinetic_over_potential(t: f64, params: &ModelParams) -> f64 {
    let lb = params.lambda_bar();
    let kinetic = lb * msq_momentum(t, params);
    let potential = 1.0 / (lb * lb * msq_position(params).sqrt());
    kinetic / potential
}

/// σ_B = (3√3/2)·λ̄³ for a given mass.
pub fn sigma_b_for_mass(mass: f64) -> f64 {
    let lb = 1.0 / mass;
    1.5 * SQRT_3 * lb * lb * lb
}

pub fn sigma_b(params: &ModelParams) -> f64 {
    sigma_b_for_mass(params.mass)
}

/// Time at which K/|U| reaches [`KU_THRESHOLD`].
pub fn t_f(params: &ModelParams) -> Result<f64, ClosedFormError> {
    let sb = sigma_b(params);
    if params.sigma <= sb {
        return Err(ClosedFormError::NoEvolutionWindow { sigma: params.sigma, sigma_b: sb });
    }
    let l = params.l_c;
    let st = params.sigma / l;
    let numer = 64.0 * st.powi(5) * (params.lambda_bar() * l) * ((params.sigma - sb) / l);
    let denom = SQRT_3 * bracket_for(params);
    Ok(l * (numer / denom).sqrt())
}

/// Parameter-space classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionLabel {
    /// m/M_C > 1.
    BeyondCut,
    /// σ/L_C ≤ 1.
    Hatched,
    /// σ/λ̄ < 1/2.
    BelowQuantumMinimum,
    /// σ ≤ σ_B: kinetic term not negligible.
    RegionI,
    /// The allowed subspace.
    RegionII,
}

impl RegionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::BeyondCut => "BeyondCut",
            Self::Hatched => "Hatched",
            Self::BelowQuantumMinimum => "BelowQuantumMinimum",
            Self::RegionI => "RegionI",
            Self::RegionII => "RegionII",
        }
    }

    pub fn is_allowed(self) -> bool {
        self == Self::RegionII
    }
}

impl fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Precedence: BeyondCut, Hatched, BelowQuantumMinimum, RegionI, RegionII.
///
/// The cut itself (μ = 1) is kept on the allowed side, σ = L_C is hatched,
/// σ/λ̄ = 1/2 is allowed and σ = σ_B falls in Region I.
pub fn classify_region(params: &ModelParams) -> RegionLabel {
    let lb = params.lambda_bar();
    if params.mu() > 1.0 {
        RegionLabel::BeyondCut
    } else if params.sigma / params.l_c <= 1.0 {
        RegionLabel::Hatched
    } else if params.sigma / lb < 0.5 {
        RegionLabel::BelowQuantumMinimum
    } else if params.sigma <= sigma_b(params) {
        RegionLabel::RegionI
    } else {
        RegionLabel::RegionII
    }
}
