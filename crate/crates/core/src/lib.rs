//! Gravitational self-decoherence of a free Gaussian wavepacket.
//!
//! A particle of mass `m` interacts with a virtual clone of itself through a
//! regularized Newtonian potential; tracing out the clone leaves the particle
//! in a mixed state whose purity η(t) decays until the potential-dominated
//! window closes at `t_F`. Everything is in Planck units.

#![allow(clippy::excessive_precision)]

pub mod closedform;
mod erfcx;
pub mod mcpurity;
pub mod oracles;
pub mod rng;
pub mod summation;
pub mod sweep;
pub mod units;
pub mod cli;

pub use closedform::{classify_region, RegionLabel};
pub use erfcx::erfcx;
pub use mcpurity::{estimate_purity, final_purity, McConfig, PurityCurve, PurityEstimate};
pub use sweep::{run_figure, FigureKind, FigureSpec, RunManifest};
pub use units::{derive, DerivedScales, MassSpec, ModelParams, SigmaMode, SigmaSpec};
