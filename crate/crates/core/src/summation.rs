//! Compensated accumulation and a fixed-order merge of chunk statistics.

use serde::{Deserialize, Serialize};

/// Neumaier-compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum(xs: &[f64]) -> f64 {
    let mut acc = CompensatedSum::default();
    for &x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Count, mean and centered second moment of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChunkStats {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl ChunkStats {
    /// Two-pass statistics with compensated sums.
    pub fn from_slice(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self::default();
        }
        let n = xs.len();
        let mean = compensated_sum(xs) / n as f64;
        let mut m2 = CompensatedSum::default();
        for &x in xs {
            let d = x - mean;
            m2.add(d * d);
        }
        Self { n: n as u64, mean, m2: m2.value() }
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&self, other: &Self) -> Self {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let (na, nb, nn) = (self.n as f64, other.n as f64, n as f64);
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * (nb / nn);
        let m2 = self.m2 + other.m2 + delta * delta * (na * nb / nn);
        Self { n, mean, m2 }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// Balanced binary-tree merge in index order; the result depends only on the
/// sequence of chunks, not on how they were produced.
pub fn pairwise_merge(chunks: &[ChunkStats]) -> ChunkStats {
    match chunks.len() {
        0 => ChunkStats::default(),
        1 => chunks[0],
        len => {
            let (left, right) = chunks.split_at(len / 2);
            pairwise_merge(left).merge(&pairwise_merge(right))
        }
    }
}
