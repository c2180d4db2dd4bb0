//! Radial oracle for the growth of ⟨p²⟩.
//!
//! With Ψ = |Ψ|·exp(i m² t f(u)), u = |r − r̄|, f(u) = (u² + L_C²)^{−1/2},
//!
//! ```text
//! |∇_r Ψ|²/|Ψ|² = r²/(4σ⁴) + m⁴t²·f′(u)²,
//! ```
//!
//! so ⟨p²⟩(t) − ⟨p²⟩(0) = m⁴t²·J with J = E[u²/(u² + L_C²)³] and
//! r − r̄ ~ N(0, 2σ²·I), i.e. u Maxwell-distributed. Substituting u = L_C·s
//! gives J = L_C⁻⁴·Ĵ(σ̃), which is integrated here in one dimension.

use std::f64::consts::PI;

use super::quadrature::integrate_adaptive;
use super::{OracleError, QuadConfig};
use crate::units::ModelParams;

/// J = E[u²/(u² + L_C²)³] for the inter-point distance u.
pub fn radial_integral(params: &ModelParams, cfg: &QuadConfig) -> Result<f64, OracleError> {
    cfg.validate()?;
    let st = params.sigma / params.l_c;
    // Maxwell density of s with per-component variance 2σ̃², scaled by σ̃³
    // so the integral is O(1).
    let norm = 4.0 * PI * (4.0 * PI).powf(-1.5);
    let inv4 = 1.0 / (4.0 * st * st);
    let integrand = |s: f64| {
        let s2 = s * s;
        let q = s2 + 1.0;
        norm * s2 * (-s2 * inv4).exp() * s2 / (q * q * q)
    };
    let mut breaks = vec![0.0];
    let mut b = 0.25;
    let end = 40.0 * st.max(1.0);
    while b < end {
        breaks.push(b);
        b *= 4.0;
    }
    breaks.push(end);
    let (scaled, _) = integrate_adaptive(integrand, &breaks, cfg.abs_tol, 100_000)?;
    Ok(scaled / st.powi(3) / params.l_c.powi(4))
}

/// m⁴t²·J.
pub fn radial_msq_excess(t: f64, params: &ModelParams, cfg: &QuadConfig) -> Result<f64, OracleError> {
    if t == 0.0 {
        return Ok(0.0);
    }
    Ok(params.mass.powi(4) * t * t * radial_integral(params, cfg)?)
}
