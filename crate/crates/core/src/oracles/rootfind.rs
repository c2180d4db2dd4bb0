use crate::closedform::{kinetic_over_potential, sigma_b, ClosedFormError, KU_THRESHOLD};
use crate::units::ModelParams;

/// Bracketed bisection for K/|U|(t) = 1/2, expanding the upper bracket
/// geometrically.
pub fn tf_rootfind(params: &ModelParams) -> Result<f64, ClosedFormError> {
    let sb = sigma_b(params);
    if params.sigma <= sb {
        return Err(ClosedFormError::NoEvolutionWindow { sigma: params.sigma, sigma_b: sb });
    }
    let excess = |t: f64| kinetic_over_potential(t, params) - KU_THRESHOLD;
    let mut hi = params.sigma.max(1.0);
    while excess(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..2000 {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi || hi - lo <= 1e-13 * hi {
            break;
        }
        if excess(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo + 0.5 * (hi - lo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedform::{sigma_b_for_mass, t_f};

    #[test]
    fn near_boundary_root() {
        let params = ModelParams::new(1.0, 0.5, 1.0001 * sigma_b_for_mass(0.5)).unwrap();
        let root = tf_rootfind(&params).unwrap();
        assert!(root > 0.0);
        assert!((kinetic_over_potential(root, &params) - 0.5).abs() <= 1e-10);
        assert!(((root - t_f(&params).unwrap()) / root).abs() <= 1e-9);
    }

    #[test]
    fn monotone_in_sigma() {
        let mut last = 0.0;
        for k in [2.0, 5.0, 30.0, 60.0, 200.0] {
            let params = ModelParams::new(1.0, 0.5, k * sigma_b_for_mass(0.5)).unwrap();
            let root = tf_rootfind(&params).unwrap();
            assert!(root > last);
            last = root;
        }
    }

    #[test]
    fn rejects_region_one() {
        let params = ModelParams::new(1.0, 0.5, sigma_b_for_mass(0.5)).unwrap();
        assert!(tf_rootfind(&params).is_err());
    }
}
