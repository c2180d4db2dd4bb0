//! Sobol low-discrepancy points with random digital shifts.

/// (degree, polynomial interior coefficients, initial direction integers)
/// for dimensions 2.. from the Joe–Kuo table.
const TABLE: [(u32, u32, &[u32]); 12] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
];

pub const MAX_DIMS: usize = TABLE.len() + 1;
const BITS: usize = 32;

#[derive(Debug, Clone)]
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
}

impl Sobol {
    /// Panics if `dims` exceeds [`MAX_DIMS`].
    pub fn new(dims: usize) -> Self {
        assert!(dims <= MAX_DIMS, "at most {MAX_DIMS} Sobol dimensions supported");
        let mut directions = Vec::with_capacity(dims);
        if dims > 0 {
            let mut v = [0u32; BITS];
            for (k, slot) in v.iter_mut().enumerate() {
                *slot = 1 << (BITS - 1 - k);
            }
            directions.push(v);
        }
        for &(s, a, m) in TABLE.iter().take(dims.saturating_sub(1)) {
            let s = s as usize;
            let mut v = [0u32; BITS];
            for k in 0..s.min(BITS) {
                v[k] = m[k] << (BITS - 1 - k);
            }
            for k in s..BITS {
                let mut x = v[k - s] ^ (v[k - s] >> s);
                for j in 1..s {
                    if (a >> (s - 1 - j)) & 1 == 1 {
                        x ^= v[k - j];
                    }
                }
                v[k] = x;
            }
            directions.push(v);
        }
        Self { directions }
    }

    pub fn dims(&self) -> usize {
        self.directions.len()
    }

    /// Integer coordinates of point `index`, written into `out`.
    pub fn point_bits(&self, index: u32, out: &mut [u32]) {
        let gray = index ^ (index >> 1);
        for (o, v) in out.iter_mut().zip(&self.directions) {
            let mut x = 0u32;
            let mut g = gray;
            let mut k = 0;
            while g != 0 {
                if g & 1 == 1 {
                    x ^= v[k];
                }
                g >>= 1;
                k += 1;
            }
            *o = x;
        }
    }

    /// Point `index` after XOR-ing `shift`, mapped to the open unit cube.
    pub fn shifted_point(&self, index: u32, shift: &[u32], out: &mut [f64]) {
        let mut bits = vec![0u32; self.dims()];
        self.point_bits(index, &mut bits);
        for ((o, b), s) in out.iter_mut().zip(bits).zip(shift) {
            *o = ((b ^ s) as f64 + 0.5) * (1.0 / 4_294_967_296.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn each_dimension_is_stratified() {
        let sobol = Sobol::new(MAX_DIMS);
        let k = 10;
        let n = 1u32 << k;
        let mut bits = vec![0u32; MAX_DIMS];
        let mut seen = vec![vec![false; n as usize]; MAX_DIMS];
        for i in 0..n {
            sobol.point_bits(i, &mut bits);
            for (d, b) in bits.iter().enumerate() {
                let cell = (b >> (32 - k)) as usize;
                assert!(!seen[d][cell], "dimension {d} repeats cell {cell}");
                seen[d][cell] = true;
            }
        }
    }

    #[test]
    fn two_dimensional_projections_are_nets() {
        // First 2^(2k) points fill every 2^k × 2^k cell for the leading pair.
        let sobol = Sobol::new(2);
        let k = 4;
        let n = 1u32 << (2 * k);
        let mut bits = [0u32; 2];
        let mut seen = vec![false; n as usize];
        for i in 0..n {
            sobol.point_bits(i, &mut bits);
            let cell = ((bits[0] >> (32 - k)) << k | (bits[1] >> (32 - k))) as usize;
            assert!(!seen[cell]);
            seen[cell] = true;
        }
    }

    #[test]
    fn shifted_points_in_open_cube() {
        let sobol = Sobol::new(3);
        let mut out = [0.0; 3];
        sobol.shifted_point(0, &[0, u32::MAX, 7], &mut out);
        assert!(out.iter().all(|&u| u > 0.0 && u < 1.0));
    }
}
