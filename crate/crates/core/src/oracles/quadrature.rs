//! Gaussian quadrature rules and adaptive Gauss–Kronrod integration.

use std::collections::BinaryHeap;
use std::cmp::Ordering;
use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("adaptive quadrature did not converge: estimate {estimate}, error {error} > tolerance {tolerance} after {intervals} intervals")]
    NonConvergence { estimate: f64, error: f64, tolerance: f64, intervals: usize },
    #[error("quadrature rule needs at least one node")]
    EmptyRule,
}

/// Nodes and weights of a one-dimensional rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss–Hermite rule for ∫ e^{−x²} f(x) dx (physicists' weight).
///
/// Newton iteration on the orthonormal Hermite recurrence with the usual
/// asymptotic starting guesses.
pub fn gauss_hermite(n: usize) -> Result<Rule, QuadError> {
    if n == 0 {
        return Err(QuadError::EmptyRule);
    }
    let pim4 = PI.powf(-0.25);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        nodes[i] = z;
        nodes[n - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    // ascending order
    nodes.reverse();
    weights.reverse();
    Ok(Rule { nodes, weights })
}

/// Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> Result<Rule, QuadError> {
    if n == 0 {
        return Err(QuadError::EmptyRule);
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    Ok(Rule { nodes, weights })
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// 15-point Kronrod estimate and |K15 − G7| on [a, b].
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let f1 = f(c - h * x);
        let f2 = f(c + h * x);
        kronrod += w * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

struct Interval {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod over consecutive breakpoints; splits the
/// interval with the largest error estimate until the total error is below
/// `abs_tol`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(
    f: F,
    breakpoints: &[f64],
    abs_tol: f64,
    max_intervals: usize,
) -> Result<(f64, f64), QuadError> {
    let mut heap = BinaryHeap::new();
    for w in breakpoints.windows(2) {
        let (value, error) = gk15(&f, w[0], w[1]);
        heap.push(Interval { a: w[0], b: w[1], value, error });
    }
    loop {
        let total_err: f64 = heap.iter().map(|i| i.error).sum();
        if total_err <= abs_tol {
            break;
        }
        if heap.len() >= max_intervals {
            let estimate = heap.iter().map(|i| i.value).sum();
            return Err(QuadError::NonConvergence { estimate, error: total_err, tolerance: abs_tol, intervals: heap.len() });
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = gk15(&f, a, b);
            heap.push(Interval { a, b, value, error });
        }
    }
    let mut parts: Vec<Interval> = heap.into_vec();
    parts.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = crate::summation::compensated_sum(&parts.iter().map(|i| i.value).collect::<Vec<_>>());
    let error = parts.iter().map(|i| i.error).sum();
    Ok((value, error))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hermite_moments() {
        for n in [8, 20, 24, 48] {
            let rule = gauss_hermite(n).unwrap();
            let m0: f64 = rule.weights.iter().sum();
            let m2: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x * x).sum();
            let m4: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(4)).sum();
            assert_relative_eq!(m0, PI.sqrt(), max_relative = 1e-13);
            assert_relative_eq!(m2, PI.sqrt() / 2.0, max_relative = 1e-13);
            assert_relative_eq!(m4, 3.0 * PI.sqrt() / 4.0, max_relative = 1e-12);
            assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
        }
        // ∫ e^{−x²} cos x dx = √π e^{−1/4}
        let rule = gauss_hermite(20).unwrap();
        let v: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.cos()).sum();
        assert_relative_eq!(v, PI.sqrt() * (-0.25f64).exp(), max_relative = 1e-13);
        let odd = gauss_hermite(7).unwrap();
        assert_eq!(odd.nodes[3], 0.0);
    }

    #[test]
    fn legendre_polynomials_exact() {
        let rule = gauss_legendre(20).unwrap();
        let sum: f64 = rule.weights.iter().sum();
        assert_relative_eq!(sum, 2.0, max_relative = 1e-14);
        let x6: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(6)).sum();
        assert_relative_eq!(x6, 2.0 / 7.0, max_relative = 1e-13);
        assert!(gauss_legendre(0).is_err());
    }

    #[test]
    fn adaptive_handles_peaks() {
        let (v, err) = integrate_adaptive(|x| 1.0 / (1.0 + x * x), &[0.0, 1.0, 10.0, 1e3, 1e6], 1e-12, 2000).unwrap();
        assert_relative_eq!(v, (1e6f64).atan(), max_relative = 1e-11);
        assert!(err <= 1e-12);
        let (v, _) = integrate_adaptive(|x: f64| x.sqrt(), &[0.0, 1.0], 1e-10, 2000).unwrap();
        assert_relative_eq!(v, 2.0 / 3.0, max_relative = 1e-9);
    }

    #[test]
    fn adaptive_reports_non_convergence() {
        let res = integrate_adaptive(|x: f64| (1.0 / x).sin() / x, &[1e-9, 1.0], 1e-14, 10);
        assert!(matches!(res, Err(QuadError::NonConvergence { .. })));
    }
}
