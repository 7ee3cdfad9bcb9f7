//! Packed antisymmetric tensors.
//!
//! Only the strictly upper triangle `l[j][k]`, `j < k`, is stored, row-major.
//! Reads with `j > k` return `-l[k][j]` and the diagonal reads as zero, so
//! antisymmetry holds by construction.

/// Number of packed entries for an `n x n` antisymmetric tensor.
pub fn packed_len(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Packed index of `(j, k)` with `j < k < n`.
#[inline]
pub fn packed_index(n: usize, j: usize, k: usize) -> usize {
    debug_assert!(j < k && k < n);
    // rows 0..j hold (n-1) + (n-2) + ... + (n-j) entries
    j * (2 * n - j - 1) / 2 + (k - j - 1)
}

/// Inverse of [`packed_index`]: all `(j, k)` pairs in storage order.
pub fn index_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |j| (j + 1..n).map(move |k| (j, k)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkewTensor {
    n: usize,
    upper: Vec<f64>,
}

impl SkewTensor {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            upper: vec![0.0; packed_len(n)],
        }
    }

    /// Wraps packed upper-triangular data. Panics if the length is wrong.
    pub fn from_packed(n: usize, upper: Vec<f64>) -> Self {
        assert_eq!(upper.len(), packed_len(n), "packed length mismatch");
        Self { n, upper }
    }

    /// Exterior product `x ∧ y`, i.e. `l_jk = x_j y_k - x_k y_j`.
    pub fn wedge(x: &[f64], y: &[f64]) -> Self {
        assert_eq!(x.len(), y.len());
        let n = x.len();
        let upper = index_pairs(n)
            .map(|(j, k)| x[j] * y[k] - x[k] * y[j])
            .collect();
        Self { n, upper }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn packed(&self) -> &[f64] {
        &self.upper
    }

    pub fn packed_mut(&mut self) -> &mut [f64] {
        &mut self.upper
    }

    /// Entry `(j, k)` with antisymmetry expanded.
    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        use std::cmp::Ordering;
        match j.cmp(&k) {
            Ordering::Less => self.upper[packed_index(self.n, j, k)],
            Ordering::Greater => -self.upper[packed_index(self.n, k, j)],
            Ordering::Equal => 0.0,
        }
    }

    /// Sets `(j, k)` for `j < k`; the mirrored entry follows automatically.
    #[inline]
    pub fn set(&mut self, j: usize, k: usize, value: f64) {
        self.upper[packed_index(self.n, j, k)] = value;
    }

    /// Dense `n x n` row-major expansion.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|j| (0..self.n).map(|k| self.get(j, k)).collect())
            .collect()
    }

    /// Packs the strict upper triangle of a dense matrix.
    pub fn from_dense_upper(m: &[Vec<f64>]) -> Self {
        let n = m.len();
        let upper = index_pairs(n).map(|(j, k)| m[j][k]).collect();
        Self { n, upper }
    }

    pub fn is_finite(&self) -> bool {
        self.upper.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packed_index_matches_enumeration() {
        for n in 2..8 {
            for (idx, (j, k)) in index_pairs(n).enumerate() {
                assert_eq!(packed_index(n, j, k), idx);
            }
            assert_eq!(index_pairs(n).count(), packed_len(n));
        }
    }

    #[test]
    fn antisymmetric_reads() {
        let l = SkewTensor::wedge(&[1.0, 2.0, 3.0], &[0.5, -1.0, 4.0]);
        for j in 0..3 {
            assert_eq!(l.get(j, j), 0.0);
            for k in 0..3 {
                assert_eq!(l.get(j, k), -l.get(k, j));
            }
        }
        assert_eq!(l.get(0, 1), -1.0 - 2.0 * 0.5);
    }
}
