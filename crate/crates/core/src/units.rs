//! Planck-unit conventions (ħ = c = G = 1) and the model's parameter point.
//!
//! Every quantity handled by the library is expressed in Planck units:
//! lengths in L_P, masses in M_P, times in t_P. SI values appear only in
//! [`to_si`], which exists for reporting.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// CODATA 2018 Planck length in metres.
pub const PLANCK_LENGTH_M: f64 = 1.616_255e-35;
/// CODATA 2018 Planck mass in kilograms.
pub const PLANCK_MASS_KG: f64 = 2.176_434e-8;
/// CODATA 2018 Planck time in seconds.
pub const PLANCK_TIME_S: f64 = 5.391_247e-44;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("invalid parameter `{name}` = {value}: must be finite and > 0")]
    NonPositive { name: &'static str, value: f64 },
    #[error("unknown quantity kind `{0}` (expected length, mass or time)")]
    UnknownKind(String),
    #[error("unknown sigma mode `{0}` (expected absolute, multiple_of_sigma_b or multiple_of_lambda_bar)")]
    UnknownSigmaMode(String),
    #[error("cannot parse `{input}`: expected a number with optional suffix {expected}")]
    BadQuantity { input: String, expected: &'static str },
}

/// Splits `"30sb"` into (30.0, "sb"). The suffix is the trailing run of ASCII
/// letters; a bare number has an empty suffix.
fn split_suffixed(input: &str, expected: &'static str) -> Result<(f64, String), ParamError> {
    let s = input.trim();
    let bad = || ParamError::BadQuantity { input: input.to_string(), expected };
    // An exponent like "1e-3" ends in a digit, so letters at the end are a suffix.
    let cut = s.len() - s.bytes().rev().take_while(|b| b.is_ascii_alphabetic()).count();
    let (number, suffix) = s.split_at(cut);
    let value: f64 = number.parse().map_err(|_| bad())?;
    Ok((value, suffix.to_ascii_lowercase()))
}

fn check_positive(name: &'static str, value: f64) -> Result<f64, ParamError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ParamError::NonPositive { name, value })
    }
}

/// The physical point (L_C, m, σ), all in Planck units.
///
/// Region membership is not enforced here; see
/// [`classify_region`](crate::closedform::classify_region).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Cutoff length L_C.
    pub l_c: f64,
    /// Particle mass m.
    pub mass: f64,
    /// Wavepacket standard deviation σ.
    pub sigma: f64,
}

impl ModelParams {
    pub fn new(l_c: f64, mass: f64, sigma: f64) -> Result<Self, ParamError> {
        let params = Self { l_c, mass, sigma };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        check_positive("l_c", self.l_c)?;
        check_positive("mass", self.mass)?;
        check_positive("sigma", self.sigma)?;
        Ok(())
    }

    /// Reduced Compton wavelength λ̄ = 1/m.
    pub fn lambda_bar(&self) -> f64 {
        1.0 / self.mass
    }

    /// μ = m / M_C = m · L_C.
    pub fn mu(&self) -> f64 {
        self.mass * self.l_c
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self, ParamError> {
        Self::new(self.l_c, self.mass, sigma)
    }
}

impl fmt::Display for ModelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l_c={} mass={} sigma={}", self.l_c, self.mass, self.sigma)
    }
}

/// Secondary scales derived from a [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedScales {
    pub lambda_bar: f64,
    /// Heisenberg-cut mass M_C = 1/L_C.
    pub m_c: f64,
    /// σ̃ = σ / L_C.
    pub sigma_tilde: f64,
    /// μ = m / M_C.
    pub mu: f64,
}

pub fn derive(params: &ModelParams) -> Result<DerivedScales, ParamError> {
    params.validate()?;
    Ok(DerivedScales {
        lambda_bar: params.lambda_bar(),
        m_c: 1.0 / params.l_c,
        sigma_tilde: params.sigma / params.l_c,
        mu: params.mu(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    /// σ given directly in Planck lengths.
    Absolute,
    /// σ = value · σ_B.
    MultipleOfSigmaB,
    /// σ = value · λ̄.
    MultipleOfLambdaBar,
}

impl FromStr for SigmaMode {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "absolute" => Ok(Self::Absolute),
            "multiple_of_sigma_b" => Ok(Self::MultipleOfSigmaB),
            "multiple_of_lambda_bar" => Ok(Self::MultipleOfLambdaBar),
            other => Err(ParamError::UnknownSigmaMode(other.to_string())),
        }
    }
}

/// How σ is specified before the mass is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaSpec {
    pub mode: SigmaMode,
    pub value: f64,
}

impl SigmaSpec {
    pub fn new(mode: SigmaMode, value: f64) -> Result<Self, ParamError> {
        check_positive("sigma", value)?;
        Ok(Self { mode, value })
    }

    pub fn absolute(value: f64) -> Result<Self, ParamError> {
        Self::new(SigmaMode::Absolute, value)
    }

    pub fn sigma_b(multiple: f64) -> Result<Self, ParamError> {
        Self::new(SigmaMode::MultipleOfSigmaB, multiple)
    }

    pub fn lambda_bar(multiple: f64) -> Result<Self, ParamError> {
        Self::new(SigmaMode::MultipleOfLambdaBar, multiple)
    }
}

impl fmt::Display for SigmaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let suffix = match self.mode {
            SigmaMode::Absolute => "lp",
            SigmaMode::MultipleOfSigmaB => "sb",
            SigmaMode::MultipleOfLambdaBar => "lb",
        };
        write!(f, "{}{}", self.value, suffix)
    }
}

/// Parses `30sb`, `2lb`, `100lp`; a bare number means Planck lengths.
impl FromStr for SigmaSpec {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        const EXPECTED: &str = "sb | lb | lp";
        let (value, suffix) = split_suffixed(s, EXPECTED)?;
        let mode = match suffix.as_str() {
            "" | "lp" => SigmaMode::Absolute,
            "sb" => SigmaMode::MultipleOfSigmaB,
            "lb" => SigmaMode::MultipleOfLambdaBar,
            _ => return Err(ParamError::BadQuantity { input: s.to_string(), expected: EXPECTED }),
        };
        Self::new(mode, value)
    }
}

/// Mass either in Planck masses or as a fraction of the cutoff mass M_C = 1/L_C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassSpec {
    Planck(f64),
    CutoffFraction(f64),
}

impl MassSpec {
    pub fn resolve(self, l_c: f64) -> Result<f64, ParamError> {
        check_positive("l_c", l_c)?;
        match self {
            Self::Planck(m) => check_positive("mass", m),
            Self::CutoffFraction(mu) => check_positive("mass", mu / l_c),
        }
    }
}

/// Parses `1mp`, `0.5mc`; a bare number means Planck masses.
impl FromStr for MassSpec {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        const EXPECTED: &str = "mp | mc";
        let (value, suffix) = split_suffixed(s, EXPECTED)?;
        check_positive("mass", value)?;
        match suffix.as_str() {
            "" | "mp" => Ok(Self::Planck(value)),
            "mc" => Ok(Self::CutoffFraction(value)),
            _ => Err(ParamError::BadQuantity { input: s.to_string(), expected: EXPECTED }),
        }
    }
}

impl fmt::Display for MassSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Planck(m) => write!(f, "{m}mp"),
            Self::CutoffFraction(mu) => write!(f, "{mu}mc"),
        }
    }
}

/// Absolute σ in Planck lengths for the given cutoff and mass.
pub fn resolve_sigma(spec: &SigmaSpec, l_c: f64, mass: f64) -> Result<f64, ParamError> {
    check_positive("sigma", spec.value)?;
    check_positive("l_c", l_c)?;
    check_positive("mass", mass)?;
    Ok(match spec.mode {
        SigmaMode::Absolute => spec.value,
        SigmaMode::MultipleOfSigmaB => spec.value * crate::closedform::sigma_b_for_mass(mass),
        SigmaMode::MultipleOfLambdaBar => spec.value * (1.0 / mass),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Length,
    Mass,
    Time,
}

impl FromStr for Quantity {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "length" => Ok(Self::Length),
            "mass" => Ok(Self::Mass),
            "time" => Ok(Self::Time),
            other => Err(ParamError::UnknownKind(other.to_string())),
        }
    }
}

/// A value converted to SI for display.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiValue {
    pub value: f64,
    pub unit: &'static str,
}

impl fmt::Display for SiValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e} {}", self.value, self.unit)
    }
}

pub fn to_si(value: f64, kind: Quantity) -> SiValue {
    match kind {
        Quantity::Length => SiValue { value: value * PLANCK_LENGTH_M, unit: "m" },
        Quantity::Mass => SiValue { value: value * PLANCK_MASS_KG, unit: "kg" },
        Quantity::Time => SiValue { value: value * PLANCK_TIME_S, unit: "s" },
    }
}
