//! Small dense matrices and Cholesky factorisation, generic over [`Real`].
//!
//! Used for the inducing-point gram `K_zz` (M×M), which stays dense.

use crate::error::{GgpError, Result};
use crate::scalar::{dot, Real};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(GgpError::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Mat { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U) -> Mat<U> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn values(&self) -> Mat<f64> {
        self.map(|x| x.value())
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A + jitter·I`.
#[derive(Clone, Debug)]
pub struct DenseCholesky<T> {
    n: usize,
    /// Row-major, full n×n storage; entries above the diagonal are zero.
    l: Vec<T>,
}

impl<T: Real> DenseCholesky<T> {
    pub fn new(a: &Mat<T>, jitter: f64) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(GgpError::DimensionMismatch {
                expected: n,
                got: a.cols(),
            });
        }
        let mut l = vec![T::zero(); n * n];
        for j in 0..n {
            let mut d = a.get(j, j) + jitter;
            for k in 0..j {
                let ljk = l[j * n + k];
                d -= ljk * ljk;
            }
            if !(d.value() > 0.0) || !d.value().is_finite() {
                return Err(GgpError::SingularInducingGram {
                    index: j,
                    value: d.value(),
                });
            }
            let ljj = d.sqrt();
            l[j * n + j] = ljj;
            let inv = ljj.recip();
            for i in j + 1..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s * inv;
            }
        }
        Ok(DenseCholesky { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.l[i * self.n + j]
    }

    pub fn factor(&self) -> Mat<T> {
        Mat {
            rows: self.n,
            cols: self.n,
            data: self.l.clone(),
        }
    }

    /// `L⁻¹ b`.
    pub fn forward_solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        let mut x: Vec<T> = Vec::with_capacity(n);
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s = b[i] - dot(row, &x);
            x.push(s / self.l[i * n + i]);
        }
        x
    }

    /// `L⁻ᵀ b`.
    pub fn backward_solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let xi = x[i] / self.l[i * n + i];
            x[i] = xi;
            for k in 0..i {
                let lik = self.l[i * n + k];
                x[k] -= lik * xi;
            }
        }
        x
    }

    /// `(L Lᵀ)⁻¹ b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        self.backward_solve(&self.forward_solve(b))
    }

    pub fn logdet(&self) -> T {
        let mut s = T::zero();
        for i in 0..self.n {
            s += self.l[i * self.n + i].ln();
        }
        s * 2.0
    }

    /// Diagonal of `(L Lᵀ)⁻¹`, via the explicit inverse of `L`.
    pub fn inverse_diagonal(&self) -> Vec<T> {
        let n = self.n;
        // Column j of L⁻¹ solves L x = e_j; it is zero above row j.
        let mut inv = vec![T::zero(); n * n];
        for j in 0..n {
            inv[j * n + j] = self.l[j * n + j].recip();
            for i in j + 1..n {
                let mut s = T::zero();
                for k in j..i {
                    s += self.l[i * n + k] * inv[k * n + j];
                }
                inv[i * n + j] = -s / self.l[i * n + i];
            }
        }
        // diag(A⁻¹)_k = Σ_i (L⁻¹)_{ik}²
        (0..n)
            .map(|k| {
                let mut s = T::zero();
                for i in k..n {
                    let v = inv[i * n + k];
                    s += v * v;
                }
                s
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn spd(n: usize, seed: u64) -> Mat<f64> {
        // deterministic diagonally dominant SPD matrix
        let mut s = seed;
        let mut next = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        let b = Mat::from_fn(n, n, |_, _| next());
        Mat::from_fn(n, n, |i, j| {
            let mut v = 0.0;
            for k in 0..n {
                v += b.get(i, k) * b.get(j, k);
            }
            if i == j {
                v + 0.5
            } else {
                v
            }
        })
    }

    fn to_na(a: &Mat<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(a.rows(), a.cols(), |i, j| a.get(i, j))
    }

    #[test]
    fn agrees_with_nalgebra() {
        let a = spd(6, 3);
        let ch = DenseCholesky::new(&a, 0.0).unwrap();
        let oracle = to_na(&a).cholesky().unwrap();
        let l = oracle.l();
        for i in 0..6 {
            for j in 0..6 {
                assert_relative_eq!(ch.get(i, j), l[(i, j)], epsilon = 1e-12);
            }
        }
        assert_relative_eq!(ch.logdet(), to_na(&a).determinant().ln(), epsilon = 1e-10);
        let inv = to_na(&a).try_inverse().unwrap();
        for (k, d) in ch.inverse_diagonal().iter().enumerate() {
            assert_relative_eq!(*d, inv[(k, k)], epsilon = 1e-10);
        }
        let b: Vec<f64> = (0..6).map(|i| i as f64 - 2.0).collect();
        let x = ch.solve(&b);
        let back = a.matvec(&x);
        for (u, v) in back.iter().zip(&b) {
            assert_relative_eq!(u, v, epsilon = 1e-10);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let a = Mat::from_vec(2, 2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(
            DenseCholesky::new(&a, 0.0),
            Err(GgpError::SingularInducingGram { index: 1, .. })
        ));
    }
}
