//! Small dense and envelope (skyline) factorizations.
//!
//! Every matrix `I - P` built from a [`TransitionMatrix`] is symmetric positive
//! definite once the spectral radius of `P` is below one, and with row-major
//! vertex order its nonzeros sit within about one domain row of the diagonal.
//! An envelope Cholesky factor therefore costs `O(n w²)` for row width `w`.

use crate::error::{Error, Result};
use crate::lattice::TransitionMatrix;

/// Lower-triangular Cholesky factor stored row by row over each row's envelope.
#[derive(Clone, Debug)]
pub struct EnvelopeCholesky {
    n: usize,
    start: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    /// Factor `I - P`.
    pub fn one_minus(p: &TransitionMatrix) -> Result<Self> {
        if let Some((row, col)) = p.first_non_finite() {
            return Err(Error::NonFinite { row, col });
        }
        Self::factor(p.dim(), |i, row| {
            row.push((i, 1.0));
            for (j, x) in p.row(i) {
                if j <= i {
                    row.push((j, -x));
                }
            }
        })
    }

    /// Factor a symmetric matrix whose lower triangle is produced row by row.
    /// `fill(i, row)` pushes `(j, a_ij)` for `j <= i`; duplicates are summed.
    pub fn factor(n: usize, mut fill: impl FnMut(usize, &mut Vec<(usize, f64)>)) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        let mut start = Vec::with_capacity(n);
        let mut offset = Vec::with_capacity(n + 1);
        let mut len = 0usize;
        for i in 0..n {
            let mut row = Vec::new();
            fill(i, &mut row);
            let s = row.iter().map(|&(j, _)| j).min().unwrap_or(i).min(i);
            start.push(s);
            offset.push(len);
            len += i - s + 1;
            rows.push(row);
        }
        offset.push(len);
        let mut data = vec![0.0; len];
        for (i, row) in rows.into_iter().enumerate() {
            for (j, x) in row {
                debug_assert!(j <= i);
                data[offset[i] + j - start[i]] += x;
            }
        }

        for i in 0..n {
            let si = start[i];
            let oi = offset[i];
            for j in si..=i {
                let sj = start[j];
                let oj = offset[j];
                let k0 = si.max(sj);
                let dot = dot(
                    &data[oi + k0 - si..oi + j - si],
                    &data[oj + k0 - sj..oj + j - sj],
                );
                let a = data[oi + j - si] - dot;
                if j < i {
                    data[oi + j - si] = a / data[oj + j - sj];
                } else {
                    if !(a > 0.0) || !a.is_finite() {
                        return Err(Error::NotPositiveDefinite { pivot: i, value: a });
                    }
                    data[oi + i - si] = a.sqrt();
                }
            }
        }
        Ok(EnvelopeCholesky {
            n,
            start,
            offset,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn diag(&self, i: usize) -> f64 {
        self.data[self.offset[i + 1] - 1]
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[self.offset[i]..self.offset[i + 1] - 1]
    }

    /// `log det A = 2 Σ log L_ii`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.diag(i).ln()).sum::<f64>()
    }

    /// Squared diagonal `L_kk²`: the Schur complement of `A` at `k` after
    /// eliminating `0..k`, equal to `1 / (A restricted to 0..=k)⁻¹_kk`.
    pub fn pivots(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.diag(i).powi(2)).collect()
    }

    /// Solve `L y = b` in place.
    pub fn forward(&self, b: &mut [f64]) {
        for i in 0..self.n {
            let s = self.start[i];
            let d = dot(self.row(i), &b[s..i]);
            b[i] = (b[i] - d) / self.diag(i);
        }
    }

    /// Solve `Lᵀ x = y` in place.
    pub fn backward(&self, y: &mut [f64]) {
        for i in (0..self.n).rev() {
            y[i] /= self.diag(i);
            let xi = y[i];
            let s = self.start[i];
            for (yk, l) in y[s..i].iter_mut().zip(self.row(i)) {
                *yk -= l * xi;
            }
        }
    }

    /// Solve `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        self.forward(b);
        self.backward(b);
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

/// Largest dimension accepted by [`dense_log_det`].
pub const DENSE_LIMIT: usize = 4096;

/// `(log |det A|, sign)` of a row-major square matrix by LU with partial pivoting.
pub fn dense_log_det(mut a: Vec<f64>, n: usize) -> Result<(f64, f64)> {
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge {
            dim: n,
            limit: DENSE_LIMIT,
        });
    }
    if let Some(k) = a.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite {
            row: k / n.max(1),
            col: k % n.max(1),
        });
    }
    let mut log_abs = 0.0;
    let mut sign = 1.0;
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, a[i * n + k].abs()))
            .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
        if pmax == 0.0 {
            return Ok((f64::NEG_INFINITY, 0.0));
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            sign = -sign;
        }
        let pivot = a[k * n + k];
        log_abs += pivot.abs().ln();
        if pivot < 0.0 {
            sign = -sign;
        }
        for i in k + 1..n {
            let f = a[i * n + k] / pivot;
            if f == 0.0 {
                continue;
            }
            for j in k + 1..n {
                a[i * n + j] -= f * a[k * n + j];
            }
        }
    }
    Ok((log_abs, sign))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiagonal(n: usize) -> EnvelopeCholesky {
        EnvelopeCholesky::factor(n, |i, row| {
            row.push((i, 2.0));
            if i > 0 {
                row.push((i - 1, -1.0));
            }
        })
        .unwrap()
    }

    #[test]
    fn tridiagonal_determinant() {
        // det of the n×n second-difference matrix is n + 1
        for n in [1, 2, 5, 40] {
            let c = tridiagonal(n);
            assert!((c.log_det() - ((n + 1) as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn solve_round_trip() {
        let n = 7;
        let c = tridiagonal(n);
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 0.3).collect();
        let mut b: Vec<f64> = (0..n)
            .map(|i| {
                2.0 * x[i] - if i > 0 { x[i - 1] } else { 0.0 } - if i + 1 < n { x[i + 1] } else { 0.0 }
            })
            .collect();
        c.solve(&mut b);
        for i in 0..n {
            assert!((b[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_is_rejected() {
        let err = EnvelopeCholesky::factor(2, |i, row| {
            row.push((i, 1.0));
            if i == 1 {
                row.push((0, 2.0));
            }
        })
        .unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { pivot: 1, .. }));
    }

    #[test]
    fn lu_matches_known_determinants() {
        let (l, s) = dense_log_det(vec![0.0, 2.0, 3.0, 0.0], 2).unwrap();
        assert_eq!(s, -1.0);
        assert!((l - 6f64.ln()).abs() < 1e-14);
        let (l, s) = dense_log_det(vec![1.0, 2.0, 2.0, 4.0], 2).unwrap();
        assert_eq!(s, 0.0);
        assert_eq!(l, f64::NEG_INFINITY);
    }

    #[test]
    fn lu_agrees_with_cholesky() {
        let n = 12;
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            dense[i * n + i] = 2.0;
            if i > 0 {
                dense[i * n + i - 1] = -1.0;
                dense[(i - 1) * n + i] = -1.0;
            }
        }
        let (l, s) = dense_log_det(dense, n).unwrap();
        assert_eq!(s, 1.0);
        assert!((l - tridiagonal(n).log_det()).abs() < 1e-12);
    }
}
