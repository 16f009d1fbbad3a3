//! Dense reference computations shared by the integration tests. Everything
//! here is written directly from the definitions with nalgebra, independent
//! of the structured code paths under test.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use sparse_ggp::dense::Mat;
use sparse_ggp::star::{SparseStarCholesky, StarCovariance};
use sparse_ggp::variational::{GroupPosterior, PosteriorCov};

pub const INDUCING_JITTER: f64 = 1e-6;

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut StdRng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

pub fn to_dense(m: &Mat<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m.get(i, j))
}

/// Lower-triangular matrix with the star sparsity pattern.
pub fn star_factor_dense(l: &SparseStarCholesky<f64>) -> DMatrix<f64> {
    let q = l.dim();
    let mut d = DMatrix::zeros(q, q);
    for i in 0..q {
        d[(i, 0)] = l.pivot_column[i];
    }
    for i in 1..q {
        d[(i, i)] = l.off_diag[i - 1];
    }
    d
}

/// Full covariance whose off-pivot entries are implied by conditional
/// independence given the pivot.
pub fn star_cov_dense(c: &StarCovariance<f64>) -> DMatrix<f64> {
    let q = c.dim();
    DMatrix::from_fn(q, q, |i, j| match (i, j) {
        (0, 0) => c.pivot_var,
        (0, k) | (k, 0) => c.cross[k - 1],
        (a, b) if a == b => c.diag[a - 1],
        (a, b) => c.cross[a - 1] * c.cross[b - 1] / c.pivot_var,
    })
}

/// Replaces every off-pivot pair of a full gram with `K_i0 K_0j / K_00`.
pub fn pivot_conditioned(k: &DMatrix<f64>) -> DMatrix<f64> {
    let q = k.nrows();
    DMatrix::from_fn(q, q, |i, j| {
        if i == j || i == 0 || j == 0 {
            k[(i, j)]
        } else {
            k[(i, 0)] * k[(0, j)] / k[(0, 0)]
        }
    })
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

pub fn ricker(t: f64) -> f64 {
    (1.0 - t * t) * (-0.5 * t * t).exp()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

pub fn rbf(a: &[f64], b: &[f64], ell: f64, var: f64) -> f64 {
    var * (-0.5 * sq_dist(a, b) / (ell * ell)).exp()
}

pub fn epanechnikov(a: &[f64], b: &[f64], bw: f64) -> f64 {
    (1.0 - sq_dist(a, b) / (bw * bw)).max(0.0)
}

pub fn ricker_product(a: &[f64], b: &[f64], dilation: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| ricker(x / dilation) * ricker(y / dilation))
        .product()
}

pub fn logdet_spd(a: &DMatrix<f64>) -> f64 {
    let c = a.clone().cholesky().expect("positive definite");
    2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// `A ⊗ B` with the index of `A` outermost.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Dense posterior covariance of one group, function-major.
pub fn posterior_cov_dense(post: &GroupPosterior<f64>) -> DMatrix<f64> {
    match &post.cov {
        PosteriorCov::Diagonal(s) => DMatrix::from_diagonal(&DVector::from_column_slice(s)),
        PosteriorCov::Kronecker { between, within } => {
            let b = star_factor_dense(between);
            let w = star_factor_dense(within);
            kron(&(&b * b.transpose()), &(&w * w.transpose()))
        }
    }
}

/// Random star Cholesky factor with well-conditioned diagonal.
pub fn random_star_factor(rng: &mut StdRng, q: usize) -> SparseStarCholesky<f64> {
    let mut pc = vec![uniform(rng, 0.5, 1.5)];
    pc.extend((1..q).map(|_| uniform(rng, -1.0, 1.0)));
    let od = (1..q).map(|_| uniform(rng, 0.3, 1.2)).collect();
    SparseStarCholesky::new(pc, od).unwrap()
}

/// Unbiased sample mean and covariance of row vectors.
pub fn sample_moments(draws: &[Vec<f64>]) -> (DVector<f64>, DMatrix<f64>) {
    let q = draws[0].len();
    let n = draws.len() as f64;
    let mut mean = DVector::zeros(q);
    for d in draws {
        mean += DVector::from_column_slice(d);
    }
    mean /= n;
    let mut cov = DMatrix::zeros(q, q);
    for d in draws {
        let e = DVector::from_column_slice(d) - &mean;
        cov += &e * e.transpose();
    }
    (mean, cov / (n - 1.0))
}

/// Dense form of a winged precision.
pub fn winged_dense(p: &sparse_ggp::star::WingedPrecision<f64>) -> DMatrix<f64> {
    let q = p.dim();
    let mut d = DMatrix::zeros(q, q);
    d[(0, 0)] = p.pivot_scalar;
    for i in 1..q {
        d[(i, 0)] = p.wing[i - 1];
        d[(0, i)] = p.wing[i - 1];
        d[(i, i)] = p.diag[i - 1];
    }
    d
}
