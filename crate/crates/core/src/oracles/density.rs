//! Deterministic quadrature of the reduced density matrix
//! ρ(r, r′, t) = ∫ d³r̄ Ψ(r, r̄, t) Ψ*(r′, r̄, t).
//!
//! With r̄ = √2σ·y the clone integral carries the weight e^{−y²} and is done
//! with a tensor Gauss–Hermite rule:
//!
//! ```text
//! ρ(r, r′) = C·exp(−(r² + r′²)/(4σ²))·S(r, r′),   C = (2σ²)^{3/2}/(2πσ²)³,
//! S(r, r′) = Σ w_i w_j w_k · exp(i[θ(r, r̄) − θ(r′, r̄)]).
//! ```
//!
//! ρ depends on r and r′ only through |r|, |r′| and the angle between them,
//! so the purity reduces to a 3-D outer integral (radii by half-line
//! Gauss–Hermite, angle by Gauss–Legendre).

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::quadrature::{gauss_hermite, gauss_legendre, Rule};
use super::{OracleError, QuadConfig};
use crate::closedform::{phase, Vec3};
use crate::summation::compensated_sum;
use crate::units::ModelParams;

struct CloneGrid {
    points: Vec<Vec3>,
    weights: Vec<f64>,
}

impl CloneGrid {
    fn new(nodes: usize, sigma: f64) -> Result<Self, OracleError> {
        let rule = gauss_hermite(nodes)?;
        let scale = 2f64.sqrt() * sigma;
        let n = rule.nodes.len();
        let mut points = Vec::with_capacity(n * n * n);
        let mut weights = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    points.push([scale * rule.nodes[i], scale * rule.nodes[j], scale * rule.nodes[k]]);
                    weights.push(rule.weights[i] * rule.weights[j] * rule.weights[k]);
                }
            }
        }
        Ok(Self { points, weights })
    }

    fn phase_sum(&self, r: &Vec3, rp: &Vec3, t: f64, params: &ModelParams) -> Complex64 {
        let mut re = 0.0;
        let mut im = 0.0;
        for (rb, w) in self.points.iter().zip(&self.weights) {
            let dtheta = phase(r, rb, t, params) - phase(rp, rb, t, params);
            let (s, c) = dtheta.sin_cos();
            re += w * c;
            im += w * s;
        }
        Complex64::new(re, im)
    }
}

fn prefactor(sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    (2.0 * s2).powf(1.5) / (2.0 * PI * s2).powi(3)
}

fn norm_sq(v: &Vec3) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

/// Positive half of a Gauss–Hermite rule with radial weights w·x².
fn radial_rule(nodes: usize) -> Result<Rule, OracleError> {
    let full = gauss_hermite(nodes)?;
    let (nodes, weights) = full
        .nodes
        .iter()
        .zip(&full.weights)
        .filter(|(x, _)| **x > 0.0)
        .map(|(x, w)| (*x, w * x * x))
        .unzip();
    Ok(Rule { nodes, weights })
}

pub fn density_matrix_element(
    r: &Vec3,
    rp: &Vec3,
    t: f64,
    params: &ModelParams,
    cfg: &QuadConfig,
) -> Result<Complex64, OracleError> {
    cfg.validate()?;
    let grid = CloneGrid::new(cfg.nodes_per_dim, params.sigma)?;
    let envelope = (-(norm_sq(r) + norm_sq(rp)) / (4.0 * params.sigma * params.sigma)).exp();
    Ok(grid.phase_sum(r, rp, t, params) * (prefactor(params.sigma) * envelope))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagonalMoments {
    /// ∫ d³r ρ(r, r, t).
    pub trace: f64,
    /// ∫ d³r r²·ρ(r, r, t).
    pub msq_position: f64,
}

/// Trace and second moment of the diagonal of ρ, radial outer quadrature.
pub fn diagonal_moments(t: f64, params: &ModelParams, cfg: &QuadConfig) -> Result<DiagonalMoments, OracleError> {
    cfg.validate()?;
    let grid = CloneGrid::new(cfg.nodes_per_dim, params.sigma)?;
    let radial = radial_rule(cfg.outer_nodes)?;
    let scale = 2f64.sqrt() * params.sigma;
    let c = prefactor(params.sigma);
    let mut trace = Vec::new();
    let mut second = Vec::new();
    for (x, w) in radial.nodes.iter().zip(&radial.weights) {
        let a = scale * x;
        let r = [0.0, 0.0, a];
        // ρ(r, r) without the envelope, which the radial weight carries.
        let s = grid.phase_sum(&r, &r, t, params).re;
        trace.push(w * s);
        second.push(w * s * a * a);
    }
    let factor = 4.0 * PI * c * scale.powi(3);
    Ok(DiagonalMoments {
        trace: factor * compensated_sum(&trace),
        msq_position: factor * compensated_sum(&second),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraturePurity {
    pub value: f64,
    /// |η(n) − η(n/2)|, the grid-refinement error proxy.
    pub refinement_delta: f64,
    pub evaluations: u64,
}

fn nested_purity(t: f64, params: &ModelParams, inner: usize, outer: usize) -> Result<f64, OracleError> {
    let grid = CloneGrid::new(inner, params.sigma)?;
    let radial = radial_rule(outer)?;
    let angular = gauss_legendre(outer)?;
    let scale = 2f64.sqrt() * params.sigma;
    let nr = radial.nodes.len();
    let mut triples = Vec::new();
    for i in 0..nr {
        for j in i..nr {
            for k in 0..angular.nodes.len() {
                triples.push((i, j, k));
            }
        }
    }
    let terms: Vec<f64> = triples
        .par_iter()
        .map(|&(i, j, k)| {
            let a = scale * radial.nodes[i];
            let b = scale * radial.nodes[j];
            let cos_g = angular.nodes[k];
            let sin_g = (1.0 - cos_g * cos_g).max(0.0).sqrt();
            let r = [0.0, 0.0, a];
            let rp = [b * sin_g, 0.0, b * cos_g];
            let s = grid.phase_sum(&r, &rp, t, params);
            let mult = if i == j { 1.0 } else { 2.0 };
            mult * radial.weights[i] * radial.weights[j] * angular.weights[k] * s.norm_sqr()
        })
        .collect();
    let c = prefactor(params.sigma);
    Ok(8.0 * PI * PI * c * c * scale.powi(6) * compensated_sum(&terms))
}

fn outer_points(outer: usize) -> u64 {
    let nr = (outer / 2) as u64;
    nr * (nr + 1) / 2 * outer as u64
}

/// Nested deterministic quadrature of η(t) = ∫∫ |ρ(r, r′, t)|².
pub fn quadrature_purity(t: f64, params: &ModelParams, cfg: &QuadConfig) -> Result<QuadraturePurity, OracleError> {
    cfg.validate()?;
    let fine = (cfg.nodes_per_dim, cfg.outer_nodes);
    let coarse = ((cfg.nodes_per_dim / 2).max(8), (cfg.outer_nodes / 2).max(4));
    let cost = |(inner, outer): (usize, usize)| (inner as u64).pow(3) * outer_points(outer);
    let evaluations = cost(fine) + cost(coarse);
    if evaluations > cfg.max_evaluations {
        return Err(OracleError::BudgetExceeded { needed: evaluations, limit: cfg.max_evaluations });
    }
    let value = nested_purity(t, params, fine.0, fine.1)?;
    let rough = nested_purity(t, params, coarse.0, coarse.1)?;
    Ok(QuadraturePurity { value, refinement_delta: (value - rough).abs(), evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedform::{pair_wavefunction, sigma_b_for_mass, t_f};

    fn reference() -> ModelParams {
        ModelParams::new(1.0, 0.5, 30.0 * sigma_b_for_mass(0.5)).unwrap()
    }

    #[test]
    fn factorizes_at_zero_time() {
        let params = reference();
        let cfg = QuadConfig::default();
        let r = [100.0, -50.0, 20.0];
        let rp = [-300.0, 10.0, 400.0];
        let rho = density_matrix_element(&r, &rp, 0.0, &params, &cfg).unwrap();
        let s2 = params.sigma * params.sigma;
        let psi = |x: &Vec3| (2.0 * PI * s2).powf(-0.75) * (-norm_sq(x) / (4.0 * s2)).exp();
        let want = psi(&r) * psi(&rp);
        assert!((rho.re - want).abs() <= 1e-10 * want.max(1e-300) + 1e-25);
        assert_eq!(rho.im, 0.0);
        assert!(((rho.re - want) / want).abs() < 1e-10);
    }

    #[test]
    fn hermitian_and_positive_diagonal() {
        let params = reference();
        let cfg = QuadConfig { nodes_per_dim: 16, ..QuadConfig::default() };
        let t = t_f(&params).unwrap();
        let r = [200.0, 0.0, -100.0];
        let rp = [-50.0, 300.0, 10.0];
        let a = density_matrix_element(&r, &rp, t, &params, &cfg).unwrap();
        let b = density_matrix_element(&rp, &r, t, &params, &cfg).unwrap();
        assert!((a - b.conj()).norm() <= 1e-10 * a.norm());
        let d = density_matrix_element(&r, &r, t, &params, &cfg).unwrap();
        assert!(d.re > 0.0);
        assert_eq!(d.im, 0.0);
    }

    #[test]
    fn matches_direct_pair_integral() {
        // Same clone quadrature written with the closed-form pair amplitude.
        let params = ModelParams::new(1.0, 1.0, 30.0).unwrap();
        let cfg = QuadConfig { nodes_per_dim: 12, ..QuadConfig::default() };
        let t = 40.0;
        let r = [10.0, -5.0, 3.0];
        let rp = [-8.0, 2.0, 12.0];
        let rule = gauss_hermite(12).unwrap();
        let scale = 2f64.sqrt() * params.sigma;
        let mut sum = Complex64::new(0.0, 0.0);
        for (xi, wi) in rule.nodes.iter().zip(&rule.weights) {
            for (xj, wj) in rule.nodes.iter().zip(&rule.weights) {
                for (xk, wk) in rule.nodes.iter().zip(&rule.weights) {
                    let y2 = xi * xi + xj * xj + xk * xk;
                    let rb = [scale * xi, scale * xj, scale * xk];
                    let a = pair_wavefunction(&r, &rb, t, &params).to_complex();
                    let b = pair_wavefunction(&rp, &rb, t, &params).to_complex();
                    sum += a * b.conj() * (wi * wj * wk * y2.exp());
                }
            }
        }
        sum *= scale.powi(3);
        let rho = density_matrix_element(&r, &rp, t, &params, &cfg).unwrap();
        assert!((rho - sum).norm() <= 1e-10 * sum.norm());
    }

    #[test]
    fn rotational_invariance_spot_check() {
        let params = reference();
        let cfg = QuadConfig::default();
        let t = 0.5 * t_f(&params).unwrap();
        let r = [0.0, 0.0, 500.0];
        let rp = [300.0, 0.0, 200.0];
        let base = density_matrix_element(&r, &rp, t, &params, &cfg).unwrap();
        // rotation by 0.7 rad about the axis (1, 1, 1)/√3
        let (s, c) = 0.7f64.sin_cos();
        let k = 1.0 / 3f64.sqrt();
        let rot = |v: &Vec3| -> Vec3 {
            let kv = k * (v[0] + v[1] + v[2]);
            let cross = [k * (v[2] - v[1]), k * (v[0] - v[2]), k * (v[1] - v[0])];
            let mut out = [0.0; 3];
            for i in 0..3 {
                out[i] = v[i] * c + cross[i] * s + k * kv * (1.0 - c);
            }
            out
        };
        let turned = density_matrix_element(&rot(&r), &rot(&rp), t, &params, &cfg).unwrap();
        // The tensor grid is not itself rotation invariant. Between 16 and 64
        // nodes per axis the small imaginary part moves by ~4e-3 of |ρ|, so
        // that is the resolution this check can claim.
        assert!((turned - base).norm() <= 5e-3 * base.norm(), "{base} vs {turned}");
    }

    #[test]
    fn unit_trace_and_position_moment() {
        let params = reference();
        let cfg = QuadConfig::default();
        for t in [0.0, 0.5 * t_f(&params).unwrap()] {
            let m = diagonal_moments(t, &params, &cfg).unwrap();
            assert!((m.trace - 1.0).abs() <= 1e-3);
            let want = 3.0 * params.sigma * params.sigma;
            assert!(((m.msq_position - want) / want).abs() <= 1e-3);
        }
    }

    #[test]
    fn unit_purity_at_zero_time_and_budget() {
        let params = reference();
        let cfg = QuadConfig { nodes_per_dim: 8, outer_nodes: 8, ..QuadConfig::default() };
        let q = quadrature_purity(0.0, &params, &cfg).unwrap();
        assert!((q.value - 1.0).abs() <= 1e-6);
        let tight = QuadConfig { max_evaluations: 10, ..cfg };
        assert!(matches!(quadrature_purity(0.0, &params, &tight), Err(OracleError::BudgetExceeded { .. })));
    }
}
