//! Independent verification machinery.
//!
//! Each oracle reaches the same quantity as a production kernel by a
//! different route and shares nothing with it beyond the primitives in
//! [`closedform`](crate::closedform) (and, for the RQMC estimator, the
//! inverse-CDF transport to normals).

mod density;
pub mod quadrature;
mod radial;
mod rootfind;
mod rqmc;
pub mod sobol;
pub mod verify;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closedform::ClosedFormError;
use crate::mcpurity::McError;
use quadrature::QuadError;

pub use density::{density_matrix_element, diagonal_moments, quadrature_purity, DiagonalMoments, QuadraturePurity};
pub use radial::{radial_integral, radial_msq_excess};
pub use rootfind::tf_rootfind;
pub use rqmc::rqmc_purity;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    ClosedForm(#[from] ClosedFormError),
    #[error(transparent)]
    Mc(#[from] McError),
    #[error("invalid quadrature configuration: {0}")]
    InvalidConfig(String),
    #[error("quadrature budget exceeded: {needed} integrand evaluations > {limit}")]
    BudgetExceeded { needed: u64, limit: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    /// Gauss–Hermite nodes per dimension for inner clone integrals.
    pub nodes_per_dim: usize,
    /// Radial and angular nodes of the outer reduction.
    pub outer_nodes: usize,
    pub rqmc_points: u32,
    pub rqmc_shifts: usize,
    /// Absolute tolerance on the dimensionless radial integral σ̃³·Ĵ.
    pub abs_tol: f64,
    pub seed: u64,
    /// Upper bound on integrand evaluations for the nested quadrature.
    pub max_evaluations: u64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            nodes_per_dim: 24,
            outer_nodes: 20,
            rqmc_points: 1 << 14,
            rqmc_shifts: 16,
            abs_tol: 1e-13,
            seed: 0x5EED,
            max_evaluations: 20_000_000_000,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<(), OracleError> {
        if self.nodes_per_dim < 8 {
            return Err(OracleError::InvalidConfig("nodes_per_dim must be >= 8".into()));
        }
        if self.outer_nodes < 2 {
            return Err(OracleError::InvalidConfig("outer_nodes must be >= 2".into()));
        }
        if self.rqmc_shifts < 8 {
            return Err(OracleError::InvalidConfig("rqmc_shifts must be >= 8".into()));
        }
        if self.rqmc_points == 0 {
            return Err(OracleError::InvalidConfig("rqmc_points must be >= 1".into()));
        }
        if !(self.abs_tol.is_finite() && self.abs_tol > 0.0) {
            return Err(OracleError::InvalidConfig("abs_tol must be > 0".into()));
        }
        Ok(())
    }
}

/// Outcome of one oracle comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub name: String,
    pub reference_value: f64,
    pub candidate_value: f64,
    pub discrepancy: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl OracleReport {
    /// `discrepancy` is whatever measure the tolerance applies to (absolute or relative).
    pub fn new(name: impl Into<String>, reference_value: f64, candidate_value: f64, discrepancy: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            reference_value,
            candidate_value,
            discrepancy,
            tolerance,
            passed: discrepancy.abs() <= tolerance,
        }
    }

    pub fn relative(name: impl Into<String>, reference_value: f64, candidate_value: f64, tolerance: f64) -> Self {
        let disc = (candidate_value - reference_value) / reference_value.abs();
        Self::new(name, reference_value, candidate_value, disc, tolerance)
    }

    pub fn absolute(name: impl Into<String>, reference_value: f64, candidate_value: f64, tolerance: f64) -> Self {
        Self::new(name, reference_value, candidate_value, candidate_value - reference_value, tolerance)
    }
}
