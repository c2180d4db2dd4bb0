//! Randomized quasi-Monte-Carlo purity: a 12-D Sobol set under independent
//! digital shifts, pushed through the same inverse-CDF map as the MC sampler.

use rayon::prelude::*;

use super::sobol::Sobol;
use super::{OracleError, QuadConfig};
use crate::closedform::{classify_region, regularized_distance, t_f, Vec3};
use crate::mcpurity::{McError, PurityEstimate};
use crate::rng::{standard_normal, Stream};
use crate::summation::{compensated_sum, ChunkStats};
use crate::units::ModelParams;

fn inv_dist(a: &Vec3, b: &Vec3, l_c: f64) -> f64 {
    1.0 / regularized_distance(&[a[0] - b[0], a[1] - b[1], a[2] - b[2]], l_c)
}

fn shift_means(sobol: &Sobol, shift: &[u32], n: u32, params: &ModelParams, coupling: f64) -> (f64, f64) {
    let mut u = [0.0; 12];
    let mut loss = Vec::with_capacity(n as usize);
    let mut imag = Vec::with_capacity(n as usize);
    for i in 0..n {
        sobol.shifted_point(i, shift, &mut u);
        let mut pts = [[0.0; 3]; 4];
        for (k, x) in u.iter().enumerate() {
            pts[k / 3][k % 3] = params.sigma * standard_normal(*x);
        }
        let [r, rp, rb, rbp] = &pts;
        let l = params.l_c;
        let df = (inv_dist(r, rb, l) + inv_dist(rp, rbp, l)) - (inv_dist(rp, rb, l) + inv_dist(r, rbp, l));
        let phi = coupling * df;
        let h = (0.5 * phi).sin();
        loss.push(2.0 * h * h);
        imag.push(phi.sin());
    }
    (compensated_sum(&loss) / n as f64, compensated_sum(&imag) / n as f64)
}

pub fn rqmc_purity(t: f64, params: &ModelParams, cfg: &QuadConfig) -> Result<PurityEstimate, OracleError> {
    cfg.validate()?;
    params.validate().map_err(McError::from)?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(McError::InvalidTime(t).into());
    }
    let label = classify_region(params);
    if !label.is_allowed() {
        return Err(McError::RegionRefused { label }.into());
    }
    let window = t_f(params)?;
    if t > window {
        return Err(McError::BeyondWindow { t, t_f: window }.into());
    }
    if t == 0.0 {
        return Ok(PurityEstimate::exact_unit(0.0));
    }
    let sobol = Sobol::new(12);
    let mut stream = Stream::new(cfg.seed, u64::MAX);
    let shifts: Vec<Vec<u32>> = (0..cfg.rqmc_shifts)
        .map(|_| (0..12).map(|_| (stream.uniform() * 4_294_967_296.0) as u32).collect())
        .collect();
    let coupling = params.mass * params.mass * t;
    let per_shift: Vec<(f64, f64)> = shifts
        .par_iter()
        .map(|s| shift_means(&sobol, s, cfg.rqmc_points, params, coupling))
        .collect();
    let loss = ChunkStats::from_slice(&per_shift.iter().map(|x| x.0).collect::<Vec<_>>());
    let imag = ChunkStats::from_slice(&per_shift.iter().map(|x| x.1).collect::<Vec<_>>());
    Ok(PurityEstimate {
        t,
        eta: 1.0 - loss.mean,
        std_error: loss.std_error(),
        one_minus_eta: loss.mean,
        n: u64::from(cfg.rqmc_points) * cfg.rqmc_shifts as u64,
        imag_part: imag.mean,
        imag_se: imag.std_error(),
        converged: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedform::sigma_b_for_mass;

    #[test]
    fn zero_time_exact() {
        let params = ModelParams::new(1.0, 0.5, 30.0 * sigma_b_for_mass(0.5)).unwrap();
        let est = rqmc_purity(0.0, &params, &QuadConfig::default()).unwrap();
        assert_eq!(est.eta, 1.0);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn refuses_outside_window() {
        let params = ModelParams::new(1.0, 0.5, 30.0 * sigma_b_for_mass(0.5)).unwrap();
        let tf = t_f(&params).unwrap();
        assert!(rqmc_purity(2.0 * tf, &params, &QuadConfig::default()).is_err());
        let outside = ModelParams::new(1.0, 0.5, 5.0).unwrap();
        assert!(rqmc_purity(1.0, &outside, &QuadConfig::default()).is_err());
        let bad = QuadConfig { rqmc_shifts: 4, ..QuadConfig::default() };
        assert!(rqmc_purity(1.0, &params, &bad).is_err());
    }
}
