//! Which cross-function kernels produce a star covariance with no explicit
//! constraint, and what the delta correction does to the degenerate factor.
//!
//! cargo run --example implicit_sparsity

use sparse_ggp::dense::Mat;
use sparse_ggp::kernels::{verify_implicit_sparsity, FeatureMatrix, KernelSpec};
use sparse_ggp::model::{group_h_cholesky, CrossCovariance, GroupPrior, SparsityMode};

fn group(h: &[f64], k: KernelSpec) -> GroupPrior<f64> {
    GroupPrior {
        group_id: 0,
        members: (0..h.len()).collect(),
        mode: SparsityMode::Implicit,
        h_features: FeatureMatrix::column(h).unwrap(),
        x_kernel: KernelSpec::Rbf {
            lengthscales: vec![1.0],
            variance: 1.0,
        },
        h_cov: CrossCovariance::Kernel(k),
        inducing: Mat::zeros(1, 1),
    }
}

fn main() -> sparse_ggp::Result<()> {
    let h = [0.2, -0.9, 1.4, 0.6, -0.3];
    let fm = FeatureMatrix::column(&h)?;
    let ricker = KernelSpec::Product {
        factors: vec![
            KernelSpec::Constant { value: 1.5 },
            KernelSpec::RickerWavelet {
                dilation: vec![1.2],
            },
        ],
    };
    let rbf = KernelSpec::Rbf {
        lengthscales: vec![1.0],
        variance: 1.0,
    };
    for (name, k) in [("constant × ricker", &ricker), ("rbf", &rbf)] {
        let r = verify_implicit_sparsity(k, &fm, 0, 1e-10)?;
        println!(
            "{name:>18}: max violation {:.2e} -> {}",
            r.max_violation,
            if r.pass { "star" } else { "not star" }
        );
    }

    let bare = group_h_cholesky(&group(&h, ricker.clone()))?;
    println!("rank-one factor, off-pivot diagonal {:?}", bare.off_diag);
    let corrected = group_h_cholesky(&group(
        &h,
        KernelSpec::Sum {
            terms: vec![
                ricker,
                KernelSpec::DeltaCorrection {
                    variance: 0.09,
                    exclude_pivot: true,
                },
            ],
        },
    ))?;
    println!(
        "with delta σ² = 0.09, off-pivot diagonal {:?}",
        corrected.off_diag
    );
    Ok(())
}
