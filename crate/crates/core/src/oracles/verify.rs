//! The oracle suite behind `gravdec verify`.

use crate::closedform::{self, kinetic_over_potential, msq_momentum, msq_position, sigma_b_for_mass, t_f, KU_THRESHOLD};
use crate::mcpurity::{estimate_purity, Budget, McConfig};
use crate::units::ModelParams;

use super::{
    density_matrix_element, diagonal_moments, quadrature_purity, radial_integral, radial_msq_excess, rqmc_purity,
    tf_rootfind, OracleError, OracleReport, QuadConfig,
};

pub const CHECKS: [&str; 5] = ["msq", "tf", "rho", "rqmc", "quadrature"];

/// Relative perturbation applied to candidates when a fault is injected.
pub const FAULT_SIZE: f64 = 1e-3;

const MSQ_TOL: f64 = 1e-8;
const TF_TOL: f64 = 1e-9;
const TRACE_TOL: f64 = 1e-3;
const HERMITIAN_TOL: f64 = 1e-10;
const POSITION_TOL: f64 = 1e-3;
const RQMC_SIGMAS: f64 = 3.0;
const QUAD_FLOOR: f64 = 0.02;

const MU_GRID: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 1.0];
const SIGMA_MULTIPLES: [f64; 5] = [1.5, 3.0, 10.0, 30.0, 100.0];
const TIME_FRACTIONS: [f64; 3] = [0.25, 0.5, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    /// Check names to run; empty runs all.
    pub only: Vec<String>,
    pub quad: QuadConfig,
    pub mc: McConfig,
    /// Perturbs every candidate by [`FAULT_SIZE`]; a negative control.
    pub inject_fault: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            only: Vec::new(),
            quad: QuadConfig::default(),
            mc: McConfig { budget: Budget::Target { target_se: 1e-4, n_cap: 1 << 26 }, ..McConfig::default() },
            inject_fault: false,
        }
    }
}

/// Reference point for the estimator comparisons: m = M_C/2, σ = 30σ_B, L_C = 1.
pub fn reference_point() -> ModelParams {
    ModelParams::new(1.0, 0.5, 30.0 * sigma_b_for_mass(0.5)).expect("valid reference point")
}

fn region_two_grid() -> Vec<ModelParams> {
    let mut out = Vec::new();
    for &mu in &MU_GRID {
        for &k in &SIGMA_MULTIPLES {
            out.push(ModelParams::new(1.0, mu, k * sigma_b_for_mass(mu)).expect("positive grid"));
        }
    }
    out
}

struct Suite<'a> {
    opts: &'a VerifyOptions,
}

impl Suite<'_> {
    fn cand(&self, x: f64) -> f64 {
        if self.opts.inject_fault {
            x * (1.0 + FAULT_SIZE)
        } else {
            x
        }
    }

    /// Worst relative discrepancy over a list of (reference, candidate) pairs.
    fn worst(&self, name: &str, pairs: impl IntoIterator<Item = (f64, f64)>, tol: f64) -> OracleReport {
        let mut worst = OracleReport::relative(name, 1.0, 1.0, tol);
        for (r, c) in pairs {
            let rep = OracleReport::relative(name, r, self.cand(c), tol);
            if rep.discrepancy.abs() > worst.discrepancy.abs() || rep.discrepancy.is_nan() {
                worst = rep;
            }
        }
        worst
    }

    fn msq(&self) -> Result<Vec<OracleReport>, OracleError> {
        let mut pairs = Vec::new();
        let mut identity = Vec::new();
        for p in region_two_grid() {
            let tf = t_f(&p)?;
            for frac in TIME_FRACTIONS {
                let t = frac * tf;
                let reference = 0.75 / (p.sigma * p.sigma) + radial_msq_excess(t, &p, &self.opts.quad)?;
                pairs.push((reference, msq_momentum(t, &p)));
            }
            let st = p.sigma / p.l_c;
            let j = radial_integral(&p, &self.opts.quad)?;
            identity.push((128.0 * st.powi(7) * p.l_c.powi(4) * j, closedform::bracket_b(st)?));
        }
        Ok(vec![self.worst("msq.grid", pairs, MSQ_TOL), self.worst("msq.bracket_identity", identity, MSQ_TOL)])
    }

    fn tf(&self) -> Result<Vec<OracleReport>, OracleError> {
        let mut pairs = Vec::new();
        let mut worst_residual = OracleReport::absolute("tf.residual", KU_THRESHOLD, KU_THRESHOLD, TF_TOL);
        for p in region_two_grid() {
            let root = tf_rootfind(&p)?;
            let closed = t_f(&p)?;
            pairs.push((root, closed));
            let rep = OracleReport::absolute("tf.residual", KU_THRESHOLD, kinetic_over_potential(self.cand(closed), &p), TF_TOL);
            if rep.discrepancy.abs() > worst_residual.discrepancy.abs() {
                worst_residual = rep;
            }
        }
        Ok(vec![self.worst("tf.rootfind", pairs, TF_TOL), worst_residual])
    }

    fn rho(&self) -> Result<Vec<OracleReport>, OracleError> {
        let p = reference_point();
        let cfg = &self.opts.quad;
        let half = 0.5 * t_f(&p)?;
        let mut out = Vec::new();
        for (label, t) in [("t0", 0.0), ("t_half", half)] {
            let m = diagonal_moments(t, &p, cfg)?;
            out.push(OracleReport::absolute(format!("rho.trace.{label}"), 1.0, self.cand(m.trace), TRACE_TOL));
            out.push(OracleReport::relative(
                format!("rho.position.{label}"),
                msq_position(&p),
                self.cand(m.msq_position),
                POSITION_TOL,
            ));
        }
        let s = p.sigma;
        let pairs = [([0.3 * s, 0.0, -0.5 * s], [-0.1 * s, 0.8 * s, 0.2 * s]), ([s, s, 0.0], [0.0, -0.4 * s, 1.2 * s])];
        let mut worst = 0.0f64;
        for (r, rp) in pairs {
            let a = density_matrix_element(&r, &rp, half, &p, cfg)?;
            let b = density_matrix_element(&rp, &r, half, &p, cfg)?;
            let b = b.conj() * self.cand(1.0);
            worst = worst.max((a - b).norm() / a.norm());
        }
        out.push(OracleReport::new("rho.hermitian", 0.0, worst, worst, HERMITIAN_TOL));
        Ok(out)
    }

    fn rqmc(&self) -> Result<Vec<OracleReport>, OracleError> {
        let p = reference_point();
        let t = 0.5 * t_f(&p)?;
        let mc = estimate_purity(t, &p, &self.opts.mc)?;
        let qmc = rqmc_purity(t, &p, &self.opts.quad)?;
        let combined = (mc.std_error.powi(2) + qmc.std_error.powi(2)).sqrt();
        let cand = self.cand(mc.eta);
        Ok(vec![OracleReport::new("rqmc.eta", qmc.eta, cand, cand - qmc.eta, RQMC_SIGMAS * combined)])
    }

    fn quadrature(&self) -> Result<Vec<OracleReport>, OracleError> {
        let p = reference_point();
        let t = 0.5 * t_f(&p)?;
        let mc = estimate_purity(t, &p, &self.opts.mc)?;
        let quad = quadrature_purity(t, &p, &self.opts.quad)?;
        let tol = QUAD_FLOOR.max(RQMC_SIGMAS * mc.std_error);
        let cand = self.cand(mc.eta);
        let mut out = vec![OracleReport::new("quadrature.eta", quad.value, cand, cand - quad.value, tol)];
        out.push(OracleReport::new("quadrature.refinement", 0.0, quad.refinement_delta, quad.refinement_delta, tol));
        Ok(out)
    }
}

/// Runs the selected checks in a fixed order. Unknown names are an error.
pub fn run_suite(opts: &VerifyOptions) -> Result<Vec<OracleReport>, OracleError> {
    if let Some(bad) = opts.only.iter().find(|n| !CHECKS.contains(&n.as_str())) {
        return Err(OracleError::InvalidConfig(format!("unknown check `{bad}` (known: {})", CHECKS.join(", "))));
    }
    opts.quad.validate()?;
    let suite = Suite { opts };
    let mut out = Vec::new();
    for name in CHECKS {
        if !opts.only.is_empty() && !opts.only.iter().any(|n| n == name) {
            continue;
        }
        out.extend(match name {
            "msq" => suite.msq()?,
            "tf" => suite.tf()?,
            "rho" => suite.rho()?,
            "rqmc" => suite.rqmc()?,
            _ => suite.quadrature()?,
        });
    }
    Ok(out)
}
