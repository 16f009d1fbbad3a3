//! Linear algebra for star-structured covariances.
//!
//! A star covariance describes `Q` jointly Gaussian variables that are
//! conditionally independent given a pivot, stored at index 0. Its Cholesky
//! factor has one dense column plus a diagonal (`2Q − 1` stored reals) and
//! its precision has a "winged diagonal" shape: a dense first row and column
//! plus a diagonal. Every routine here is `O(Q)`.
//!
//! Callers own any permutation that moves the pivot to index 0.

use crate::error::{check_len, GgpError, Result};
use crate::scalar::Real;

/// Schur complements in `(-SCHUR_TOL, 0]` are treated as exact zeros.
pub const SCHUR_TOL: f64 = 1e-10;

/// Default jitter added to off-pivot diagonal entries.
pub const DEFAULT_JITTER: f64 = 1e-6;

/// Covariance entries that determine a star-structured matrix: the pivot
/// variance `κ₀₀`, the cross covariances `κ_{i0}` and the diagonal `κ_{ii}`.
#[derive(Clone, Debug, PartialEq)]
pub struct StarCovariance<T> {
    pub pivot_var: T,
    pub cross: Vec<T>,
    pub diag: Vec<T>,
}

impl<T: Real> StarCovariance<T> {
    pub fn new(pivot_var: T, cross: Vec<T>, diag: Vec<T>) -> Result<Self> {
        check_len(cross.len(), diag.len())?;
        Ok(StarCovariance {
            pivot_var,
            cross,
            diag,
        })
    }

    pub fn dim(&self) -> usize {
        self.cross.len() + 1
    }

    /// Covariance implied by a factor: `L Lᵀ` restricted to the entries that
    /// define it.
    pub fn from_cholesky(l: &SparseStarCholesky<T>) -> Self {
        let p0 = l.pivot_column[0];
        let cross = l.pivot_column[1..].iter().map(|&p| p * p0).collect();
        let diag = l.pivot_column[1..]
            .iter()
            .zip(&l.off_diag)
            .map(|(&p, &d)| p * p + d * d)
            .collect();
        StarCovariance {
            pivot_var: p0 * p0,
            cross,
            diag,
        }
    }

    /// `κ_{ii} − κ_{i0}² / κ₀₀` for every off-pivot index.
    pub fn schur_complements(&self) -> Vec<T> {
        let inv = self.pivot_var.recip();
        self.cross
            .iter()
            .zip(&self.diag)
            .map(|(&c, &d)| d - c * c * inv)
            .collect()
    }

    pub fn values(&self) -> StarCovariance<f64> {
        StarCovariance {
            pivot_var: self.pivot_var.value(),
            cross: self.cross.iter().map(|x| x.value()).collect(),
            diag: self.diag.iter().map(|x| x.value()).collect(),
        }
    }
}

/// Lower-triangular factor with nonzeros only in column 0 and on the diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseStarCholesky<T> {
    /// `L[0,0], L[1,0], …, L[Q−1,0]`
    pub pivot_column: Vec<T>,
    /// `L[1,1], …, L[Q−1,Q−1]`
    pub off_diag: Vec<T>,
}

impl<T: Real> SparseStarCholesky<T> {
    pub fn new(pivot_column: Vec<T>, off_diag: Vec<T>) -> Result<Self> {
        if pivot_column.is_empty() {
            return Err(GgpError::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        check_len(pivot_column.len() - 1, off_diag.len())?;
        if !(pivot_column[0].value() > 0.0) {
            return Err(GgpError::NonPositivePivot(pivot_column[0].value()));
        }
        if let Some(i) = off_diag.iter().position(|d| d.value() < 0.0) {
            return Err(GgpError::NegativeSchur {
                index: i + 1,
                value: off_diag[i].value(),
            });
        }
        Ok(SparseStarCholesky {
            pivot_column,
            off_diag,
        })
    }

    pub fn identity(dim: usize) -> Self {
        let mut pivot_column = vec![T::zero(); dim];
        pivot_column[0] = T::one();
        SparseStarCholesky {
            pivot_column,
            off_diag: vec![T::one(); dim - 1],
        }
    }

    pub fn dim(&self) -> usize {
        self.pivot_column.len()
    }

    /// Number of stored reals, always `2Q − 1`.
    pub fn stored_len(&self) -> usize {
        self.pivot_column.len() + self.off_diag.len()
    }

    pub fn scaled(&self, s: T) -> Self {
        SparseStarCholesky {
            pivot_column: self.pivot_column.iter().map(|&x| x * s).collect(),
            off_diag: self.off_diag.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn values(&self) -> SparseStarCholesky<f64> {
        SparseStarCholesky {
            pivot_column: self.pivot_column.iter().map(|x| x.value()).collect(),
            off_diag: self.off_diag.iter().map(|x| x.value()).collect(),
        }
    }

    /// `L v` as a column broadcast plus an elementwise product.
    pub fn matvec(&self, v: &[T]) -> Result<Vec<T>> {
        check_len(self.dim(), v.len())?;
        Ok(self.matvec_unchecked(v))
    }

    #[inline]
    pub(crate) fn matvec_unchecked(&self, v: &[T]) -> Vec<T> {
        let v0 = v[0];
        let mut out = Vec::with_capacity(v.len());
        out.push(self.pivot_column[0] * v0);
        for ((&p, &d), &vi) in self.pivot_column[1..]
            .iter()
            .zip(&self.off_diag)
            .zip(&v[1..])
        {
            out.push(p * v0 + d * vi);
        }
        out
    }

    /// `Lᵀ v`.
    pub fn transpose_matvec(&self, v: &[T]) -> Result<Vec<T>> {
        check_len(self.dim(), v.len())?;
        let mut head = T::zero();
        for (&p, &vi) in self.pivot_column.iter().zip(v) {
            head += p * vi;
        }
        let mut out = Vec::with_capacity(v.len());
        out.push(head);
        for (&d, &vi) in self.off_diag.iter().zip(&v[1..]) {
            out.push(d * vi);
        }
        Ok(out)
    }

    /// `‖Lᵀ v‖² = vᵀ L Lᵀ v`.
    pub fn quadratic_form(&self, v: &[T]) -> Result<T> {
        let w = self.transpose_matvec(v)?;
        Ok(w.iter().fold(T::zero(), |acc, &x| acc + x * x))
    }

    fn first_zero_diagonal(&self) -> Option<usize> {
        if !(self.pivot_column[0].value() > 0.0) {
            return Some(0);
        }
        self.off_diag
            .iter()
            .position(|d| !(d.value() > 0.0))
            .map(|i| i + 1)
    }
}

/// Sparse inverse of a star covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct WingedPrecision<T> {
    pub pivot_scalar: T,
    pub wing: Vec<T>,
    pub diag: Vec<T>,
}

impl<T: Real> WingedPrecision<T> {
    pub fn dim(&self) -> usize {
        self.wing.len() + 1
    }

    pub fn values(&self) -> WingedPrecision<f64> {
        WingedPrecision {
            pivot_scalar: self.pivot_scalar.value(),
            wing: self.wing.iter().map(|x| x.value()).collect(),
            diag: self.diag.iter().map(|x| x.value()).collect(),
        }
    }

    /// Diagonal of the precision, pivot first.
    pub fn diagonal(&self) -> Vec<T> {
        let mut d = Vec::with_capacity(self.dim());
        d.push(self.pivot_scalar);
        d.extend_from_slice(&self.diag);
        d
    }

    /// `tr(Λ S)` for a star-structured `S`.
    pub fn trace_with(&self, s: &StarCovariance<T>) -> T {
        let mut acc = self.pivot_scalar * s.pivot_var;
        for i in 0..self.wing.len() {
            acc += self.wing[i] * s.cross[i] * 2.0 + self.diag[i] * s.diag[i];
        }
        acc
    }

    /// `Σ_{j,j'} Λ[j,j'] · g(j, j')` over the nonzero pattern, for a
    /// symmetric pairwise function `g`.
    pub fn contract<F: FnMut(usize, usize) -> T>(&self, mut g: F) -> T {
        let mut acc = self.pivot_scalar * g(0, 0);
        for i in 0..self.wing.len() {
            acc += self.wing[i] * g(i + 1, 0) * 2.0 + self.diag[i] * g(i + 1, i + 1);
        }
        acc
    }
}

/// Direct construction of the sparse Cholesky factor of a star covariance.
/// `jitter` is added to off-pivot diagonal entries only.
pub fn build_star_cholesky<T: Real>(
    cov: &StarCovariance<T>,
    jitter: f64,
) -> Result<SparseStarCholesky<T>> {
    build_star_cholesky_with_tol(cov, jitter, SCHUR_TOL)
}

pub fn build_star_cholesky_with_tol<T: Real>(
    cov: &StarCovariance<T>,
    jitter: f64,
    tol: f64,
) -> Result<SparseStarCholesky<T>> {
    check_len(cov.cross.len(), cov.diag.len())?;
    if !(cov.pivot_var.value() > 0.0) {
        return Err(GgpError::NonPositivePivot(cov.pivot_var.value()));
    }
    let l00 = cov.pivot_var.sqrt();
    let inv_l00 = l00.recip();
    let inv_k00 = cov.pivot_var.recip();
    let mut pivot_column = Vec::with_capacity(cov.dim());
    pivot_column.push(l00);
    let mut off_diag = Vec::with_capacity(cov.dim() - 1);
    for (i, (&c, &d)) in cov.cross.iter().zip(&cov.diag).enumerate() {
        pivot_column.push(c * inv_l00);
        let schur = d + jitter - c * c * inv_k00;
        let s = schur.value();
        if s < -tol || s.is_nan() {
            return Err(GgpError::NegativeSchur {
                index: i + 1,
                value: s,
            });
        }
        off_diag.push(schur.clamp_nonneg().sqrt());
    }
    Ok(SparseStarCholesky {
        pivot_column,
        off_diag,
    })
}

/// `log det(L Lᵀ)`.
pub fn star_logdet<T: Real>(l: &SparseStarCholesky<T>) -> Result<T> {
    if let Some(i) = l.first_zero_diagonal() {
        return Err(GgpError::DegenerateFactor(i));
    }
    let mut s = l.pivot_column[0].ln();
    for &d in &l.off_diag {
        s += d.ln();
    }
    Ok(s * 2.0)
}

pub fn build_winged_precision<T: Real>(cov: &StarCovariance<T>) -> Result<WingedPrecision<T>> {
    check_len(cov.cross.len(), cov.diag.len())?;
    if !(cov.pivot_var.value() > 0.0) {
        return Err(GgpError::NonPositivePivot(cov.pivot_var.value()));
    }
    let inv_k00 = cov.pivot_var.recip();
    let mut wing = Vec::with_capacity(cov.cross.len());
    let mut diag = Vec::with_capacity(cov.cross.len());
    let mut pivot_scalar = inv_k00;
    for (i, (&c, &d)) in cov.cross.iter().zip(&cov.diag).enumerate() {
        let schur = d - c * c * inv_k00;
        if !(schur.value() > 0.0) {
            return Err(GgpError::DegenerateCovariance(i + 1));
        }
        let lii = schur.recip();
        wing.push(-(c * lii * inv_k00));
        diag.push(lii);
        pivot_scalar += c * c * lii * inv_k00 * inv_k00;
    }
    Ok(WingedPrecision {
        pivot_scalar,
        wing,
        diag,
    })
}

/// Winged precision of `L Lᵀ`, computed from the factor.
pub fn winged_precision_from_cholesky<T: Real>(
    l: &SparseStarCholesky<T>,
) -> Result<WingedPrecision<T>> {
    if let Some(i) = l.first_zero_diagonal() {
        return Err(GgpError::DegenerateFactor(i));
    }
    // With K = L Lᵀ: Schur complement i is d_i², κ_{i0}/κ₀₀ = p_i / p_0.
    let p0 = l.pivot_column[0];
    let inv_p0 = p0.recip();
    let mut pivot_scalar = (p0 * p0).recip();
    let mut wing = Vec::with_capacity(l.off_diag.len());
    let mut diag = Vec::with_capacity(l.off_diag.len());
    for (&p, &d) in l.pivot_column[1..].iter().zip(&l.off_diag) {
        let lii = (d * d).recip();
        let ratio = p * inv_p0;
        wing.push(-(ratio * lii));
        diag.push(lii);
        pivot_scalar += ratio * ratio * lii;
    }
    Ok(WingedPrecision {
        pivot_scalar,
        wing,
        diag,
    })
}

pub fn winged_matvec<T: Real>(p: &WingedPrecision<T>, v: &[T]) -> Result<Vec<T>> {
    check_len(p.dim(), v.len())?;
    let v0 = v[0];
    let mut head = p.pivot_scalar * v0;
    let mut out = Vec::with_capacity(v.len());
    out.push(T::zero());
    for ((&w, &d), &vi) in p.wing.iter().zip(&p.diag).zip(&v[1..]) {
        head += w * vi;
        out.push(w * v0 + d * vi);
    }
    out[0] = head;
    Ok(out)
}

/// Solves `L x = v` by forward substitution.
pub fn star_solve<T: Real>(l: &SparseStarCholesky<T>, v: &[T]) -> Result<Vec<T>> {
    check_len(l.dim(), v.len())?;
    if let Some(i) = l.first_zero_diagonal() {
        return Err(GgpError::DegenerateFactor(i));
    }
    let x0 = v[0] / l.pivot_column[0];
    let mut out = Vec::with_capacity(v.len());
    out.push(x0);
    for ((&p, &d), &vi) in l.pivot_column[1..].iter().zip(&l.off_diag).zip(&v[1..]) {
        out.push((vi - p * x0) / d);
    }
    Ok(out)
}

pub fn star_matmul_vec<T: Real>(l: &SparseStarCholesky<T>, v: &[T]) -> Result<Vec<T>> {
    l.matvec(v)
}

/// `log det(A ⊗ B) = dim_B · log det A + dim_A · log det B`.
pub fn kron_logdet<T: Real>(logdet_a: T, dim_a: usize, logdet_b: T, dim_b: usize) -> T {
    logdet_a * dim_b as f64 + logdet_b * dim_a as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn example() -> StarCovariance<f64> {
        // [[4,2,2],[2,2,1],[2,1,2]]
        StarCovariance::new(4.0, vec![2.0, 2.0], vec![2.0, 2.0]).unwrap()
    }

    #[test]
    fn cholesky_of_worked_example() {
        let l = build_star_cholesky(&example(), 0.0).unwrap();
        assert_eq!(l.pivot_column, vec![2.0, 1.0, 1.0]);
        assert_eq!(l.off_diag, vec![1.0, 1.0]);
        assert_eq!(l.stored_len(), 5);
    }

    #[test]
    fn cholesky_of_identity() {
        let cov = StarCovariance::new(1.0, vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let l = build_star_cholesky(&cov, 0.0).unwrap();
        assert_eq!(l.pivot_column, vec![1.0, 0.0, 0.0]);
        assert_eq!(l.off_diag, vec![1.0, 1.0]);
    }

    #[test]
    fn rank_one_covariance_is_degenerate() {
        // κ_ij = φ_i φ_j with φ = (1,2,3)
        let cov = StarCovariance::new(1.0, vec![2.0, 3.0], vec![4.0, 9.0]).unwrap();
        let l = build_star_cholesky(&cov, 0.0).unwrap();
        assert_eq!(l.off_diag, vec![0.0, 0.0]);
        assert!(matches!(
            star_logdet(&l),
            Err(GgpError::DegenerateFactor(1))
        ));
    }

    #[test]
    fn jitter_never_touches_pivot() {
        let cov = StarCovariance::new(1.0, vec![2.0, 3.0], vec![4.0, 9.0]).unwrap();
        let l = build_star_cholesky(&cov, 0.25).unwrap();
        assert_eq!(l.pivot_column[0], 1.0);
        assert_eq!(l.off_diag, vec![0.5, 0.5]);
    }

    #[test]
    fn schur_tolerance_band() {
        let tiny = StarCovariance::new(1.0, vec![1.0], vec![1.0 - 5e-11]).unwrap();
        assert_eq!(build_star_cholesky(&tiny, 0.0).unwrap().off_diag, vec![0.0]);
        let bad = StarCovariance::new(1.0, vec![1.0], vec![1.0 - 1e-8]).unwrap();
        assert!(matches!(
            build_star_cholesky(&bad, 0.0),
            Err(GgpError::NegativeSchur { index: 1, .. })
        ));
        let neg = StarCovariance::new(0.0, vec![1.0], vec![1.0]).unwrap();
        assert!(matches!(
            build_star_cholesky(&neg, 0.0),
            Err(GgpError::NonPositivePivot(_))
        ));
    }

    #[test]
    fn logdet_cases() {
        let l = build_star_cholesky(&example(), 0.0).unwrap();
        assert_relative_eq!(star_logdet(&l).unwrap(), 4f64.ln(), epsilon = 1e-14);
        assert_eq!(
            star_logdet(&SparseStarCholesky::<f64>::identity(3)).unwrap(),
            0.0
        );
        let d = SparseStarCholesky::new(vec![2.0, 0.0, 0.0], vec![3.0, 5.0]).unwrap();
        assert_relative_eq!(
            star_logdet(&d).unwrap(),
            2.0 * (2f64.ln() + 3f64.ln() + 5f64.ln()),
            epsilon = 1e-14
        );
    }

    #[test]
    fn winged_precision_cases() {
        let p = build_winged_precision(&example()).unwrap();
        assert_relative_eq!(p.pivot_scalar, 0.75, epsilon = 1e-15);
        assert_eq!(p.wing, vec![-0.5, -0.5]);
        assert_eq!(p.diag, vec![1.0, 1.0]);

        let id = StarCovariance::new(1.0, vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let p = build_winged_precision(&id).unwrap();
        assert_eq!(
            (p.pivot_scalar, p.wing, p.diag),
            (1.0, vec![0.0, 0.0], vec![1.0, 1.0])
        );

        let diag = StarCovariance::new(2.0, vec![0.0, 0.0], vec![4.0, 8.0]).unwrap();
        let p = build_winged_precision(&diag).unwrap();
        assert_eq!(
            (p.pivot_scalar, p.wing, p.diag),
            (0.5, vec![0.0, 0.0], vec![0.25, 0.125])
        );

        let rank1 = StarCovariance::new(1.0, vec![2.0], vec![4.0]).unwrap();
        assert!(matches!(
            build_winged_precision(&rank1),
            Err(GgpError::DegenerateCovariance(1))
        ));
    }

    #[test]
    fn precision_from_factor_matches_covariance_route() {
        let cov = example();
        let a = build_winged_precision(&cov).unwrap();
        let b = winged_precision_from_cholesky(&build_star_cholesky(&cov, 0.0).unwrap()).unwrap();
        assert_relative_eq!(a.pivot_scalar, b.pivot_scalar, epsilon = 1e-14);
        for i in 0..2 {
            assert_relative_eq!(a.wing[i], b.wing[i], epsilon = 1e-14);
            assert_relative_eq!(a.diag[i], b.diag[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn matvec_cases() {
        let p = build_winged_precision(&example()).unwrap();
        let out = winged_matvec(&p, &[1.0, 1.0, 1.0]).unwrap();
        assert_relative_eq!(out[0], -0.25, epsilon = 1e-15);
        assert_relative_eq!(out[1], 0.5, epsilon = 1e-15);
        assert_relative_eq!(out[2], 0.5, epsilon = 1e-15);
        assert_eq!(winged_matvec(&p, &[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert!(winged_matvec(&p, &[1.0]).is_err());

        let l = SparseStarCholesky::new(vec![2.0, 1.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(
            star_matmul_vec(&l, &[1.0, 0.0, 0.0]).unwrap(),
            vec![2.0, 1.0, 1.0]
        );
        assert_eq!(
            star_matmul_vec(&l, &[0.0, 1.0, 1.0]).unwrap(),
            vec![0.0, 1.0, 1.0]
        );
        assert_eq!(
            star_matmul_vec(&l, &[1.0, 1.0, 1.0]).unwrap(),
            vec![2.0, 2.0, 2.0]
        );
        assert!(star_matmul_vec(&l, &[1.0; 4]).is_err());
    }

    #[test]
    fn solve_cases() {
        let l = SparseStarCholesky::new(vec![2.0, 1.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(
            star_solve(&l, &[2.0, 2.0, 2.0]).unwrap(),
            vec![1.0, 1.0, 1.0]
        );
        assert_eq!(star_solve(&l, &[0.0; 3]).unwrap(), vec![0.0; 3]);
        let id = SparseStarCholesky::<f64>::identity(3);
        assert_eq!(
            star_solve(&id, &[3.0, -1.0, 7.0]).unwrap(),
            vec![3.0, -1.0, 7.0]
        );
        let degenerate = SparseStarCholesky::new(vec![1.0, 1.0], vec![0.0]).unwrap();
        assert!(matches!(
            star_solve(&degenerate, &[1.0, 1.0]),
            Err(GgpError::DegenerateFactor(1))
        ));
    }

    #[test]
    fn kron_logdet_cases() {
        assert_relative_eq!(kron_logdet(4f64.ln(), 3, 0.0, 2), 2.0 * 4f64.ln());
        assert_eq!(kron_logdet(0.0, 2, 0.0, 5), 0.0);
        assert_relative_eq!(
            kron_logdet(6f64.ln(), 2, 5f64.ln(), 1),
            150f64.ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn trace_and_quadratic_helpers() {
        let cov = example();
        let p = build_winged_precision(&cov).unwrap();
        // tr(K⁻¹ K) = Q
        assert_relative_eq!(p.trace_with(&cov), 3.0, epsilon = 1e-14);
        let l = build_star_cholesky(&cov, 0.0).unwrap();
        // vᵀ K v with v = (1,1,1): sum of all entries = 18
        assert_relative_eq!(
            l.quadratic_form(&[1.0, 1.0, 1.0]).unwrap(),
            18.0,
            epsilon = 1e-14
        );
        let back = StarCovariance::from_cholesky(&l);
        assert_eq!(back, cov);
    }
}
