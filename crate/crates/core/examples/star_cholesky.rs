//! Builds the sparse Cholesky factor of a star covariance directly and checks
//! it against a dense factorisation of the implied full matrix.
//!
//! cargo run --example star_cholesky -- [size]

use sparse_ggp::star::{
    build_star_cholesky, build_winged_precision, star_logdet, winged_matvec, StarCovariance,
};

fn main() -> sparse_ggp::Result<()> {
    let q: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(6);
    let k00 = 2.0;
    let cross: Vec<f64> = (1..q).map(|i| (i as f64 * 0.7).sin()).collect();
    let diag: Vec<f64> = cross.iter().map(|c| c * c / k00 + 0.5).collect();
    let cov = StarCovariance::new(k00, cross, diag)?;

    let l = build_star_cholesky(&cov, 0.0)?;
    println!("pivot column {:?}", l.pivot_column);
    println!("diagonal     {:?}", l.off_diag);
    println!(
        "stored values {} (dense lower triangle {})",
        l.stored_len(),
        q * (q + 1) / 2
    );

    // Off-pivot entries follow from conditional independence given the pivot.
    let full = |i: usize, j: usize| match (i, j) {
        (0, 0) => cov.pivot_var,
        (0, k) | (k, 0) => cov.cross[k - 1],
        (a, b) if a == b => cov.diag[a - 1],
        (a, b) => cov.cross[a - 1] * cov.cross[b - 1] / cov.pivot_var,
    };
    let mut dense = vec![vec![0.0; q]; q];
    for i in 0..q {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| dense[i][k] * dense[j][k]).sum();
            dense[i][j] = if i == j {
                (full(i, i) - s).sqrt()
            } else {
                (full(i, j) - s) / dense[j][j]
            };
        }
    }
    let mut err: f64 = 0.0;
    for i in 0..q {
        err = err.max((dense[i][0] - l.pivot_column[i]).abs());
        for j in 1..=i {
            let sparse = if i == j { l.off_diag[i - 1] } else { 0.0 };
            err = err.max((dense[i][j] - sparse).abs());
        }
    }
    println!("max |L_sparse − L_dense| = {err:.2e}");

    let p = build_winged_precision(&cov)?;
    let e0: Vec<f64> = (0..q).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
    println!("first precision column {:?}", winged_matvec(&p, &e0)?);
    println!("log det = {:.6}", star_logdet(&l)?);
    Ok(())
}
