//! Draws a group's marginal posterior at one input through the factored
//! sampler and reports the sample moments.
//!
//! cargo run --release --example indirect_sampling -- [draws]

use sparse_ggp::dense::Mat;
use sparse_ggp::kernels::{FeatureMatrix, KernelSpec};
use sparse_ggp::model::{CrossCovariance, GroupPrior, PreparedGroup, SparsityMode};
use sparse_ggp::rng;
use sparse_ggp::star::SparseStarCholesky;
use sparse_ggp::variational::{
    indirect_sample, marginal_posterior_at, GroupPosterior, PosteriorCov,
};

fn main() -> sparse_ggp::Result<()> {
    let n: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(100_000);
    let (q, m) = (4, 3);
    let gp = GroupPrior {
        group_id: 0,
        members: (0..q).collect(),
        mode: SparsityMode::Explicit,
        h_features: FeatureMatrix::column(&[0.0, 0.5, 1.0, 1.5])?,
        x_kernel: KernelSpec::Rbf {
            lengthscales: vec![1.0],
            variance: 1.0,
        },
        h_cov: CrossCovariance::Kernel(KernelSpec::Sum {
            terms: vec![
                KernelSpec::Product {
                    factors: vec![
                        KernelSpec::Rbf {
                            lengthscales: vec![1.0],
                            variance: 1.0,
                        },
                        KernelSpec::Epanechnikov { bandwidth: 3.0 },
                    ],
                },
                KernelSpec::DeltaCorrection {
                    variance: 0.1,
                    exclude_pivot: true,
                },
            ],
        }),
        inducing: Mat::from_vec(m, 1, vec![-1.0, 0.0, 1.0])?,
    };
    let post = GroupPosterior {
        mean: (0..q * m).map(|i| (i as f64 * 0.37).cos()).collect(),
        cov: PosteriorCov::Kronecker {
            between: SparseStarCholesky::new(vec![0.8, 0.2, -0.1, 0.3], vec![0.5, 0.6, 0.4])?,
            within: SparseStarCholesky::new(vec![0.4, 0.1, 0.05], vec![0.3, 0.35])?,
        },
    };
    let prepared = PreparedGroup::new(&gp)?;
    let marg = marginal_posterior_at(&post, &prepared.conditional_prior_at(&gp, &[0.4])?)?;
    println!("marginal mean {:?}, k̃ = {:.4}", marg.mean, marg.k_tilde);

    let mut stream = rng::stream(1, &[]);
    let draws = indirect_sample(&marg, &prepared.h_chol, &post.cov, &mut stream, n)?;
    let mean: Vec<f64> = (0..q)
        .map(|j| draws.iter().map(|d| d[j]).sum::<f64>() / n as f64)
        .collect();
    println!("sample mean   {mean:.4?}");
    for i in 0..q {
        let row: Vec<f64> = (0..q)
            .map(|j| {
                draws
                    .iter()
                    .map(|d| (d[i] - mean[i]) * (d[j] - mean[j]))
                    .sum::<f64>()
                    / (n - 1) as f64
            })
            .collect();
        println!("cov row {i}     {row:.4?}");
    }
    Ok(())
}
