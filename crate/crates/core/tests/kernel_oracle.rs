//! Kernel grams against closed forms, and the implicit-sparsity identity.

mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;

use common::*;
use sparse_ggp::kernels::{gram, verify_implicit_sparsity, FeatureMatrix, KernelSpec};

fn features() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..30, 1usize..4)
        .prop_flat_map(|(q, d)| prop::collection::vec(prop::collection::vec(-2.0f64..2.0, d), q))
}

fn ricker_dense(h: &[Vec<f64>], c: f64, dil: f64) -> DMatrix<f64> {
    let q = h.len();
    DMatrix::from_fn(q, q, |i, j| c * ricker_product(&h[i], &h[j], dil))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn separable_kernels_satisfy_the_identity(
        h in features(),
        c in 0.2f64..3.0,
        dil in 0.5f64..3.0,
        pivot_seed in any::<prop::sample::Index>(),
    ) {
        let pivot = pivot_seed.index(h.len());
        // ψ(h_k) ≈ 0 makes the pivot uninformative, not a violation
        let kk = ricker_product(&h[pivot], &h[pivot], dil);
        prop_assume!(kk > 1e-3);
        let fm = FeatureMatrix::from_rows(&h).unwrap();
        let spec = KernelSpec::Product {
            factors: vec![
                KernelSpec::Constant { value: c },
                KernelSpec::RickerWavelet { dilation: vec![dil] },
            ],
        };
        let report = verify_implicit_sparsity(&spec, &fm, pivot, 1e-10).unwrap();
        prop_assert!(report.pass, "violation {}", report.max_violation);

        let g = gram::<f64>(&spec, &fm, None, None).unwrap();
        let oracle = ricker_dense(&h, c, dil);
        prop_assert!(max_abs(&(to_dense(&g) - oracle)) <= 1e-12);
    }

    #[test]
    fn stationary_kernels_violate_the_identity(h in features(), ell in 0.3f64..1.5) {
        // two distinct off-pivot points are enough to break it
        let distinct = h.iter().skip(1).any(|r| sq_dist(r, &h[0]) > 0.1)
            && h.len() >= 3
            && sq_dist(&h[1], &h[2]) > 0.1;
        prop_assume!(distinct);
        let fm = FeatureMatrix::from_rows(&h).unwrap();
        let spec = KernelSpec::Rbf { lengthscales: vec![ell], variance: 1.0 };
        prop_assert!(!verify_implicit_sparsity(&spec, &fm, 0, 1e-10).unwrap().pass);
    }

    #[test]
    fn explicit_kernel_gram_matches_closed_form(h in features(), ell in 0.3f64..2.0, v in 0.5f64..2.0, bw in 0.5f64..4.0) {
        let fm = FeatureMatrix::from_rows(&h).unwrap();
        let spec = KernelSpec::Product {
            factors: vec![
                KernelSpec::Rbf { lengthscales: vec![ell], variance: v },
                KernelSpec::Epanechnikov { bandwidth: bw },
            ],
        };
        let g = to_dense(&gram::<f64>(&spec, &fm, None, None).unwrap());
        let q = h.len();
        let oracle = DMatrix::from_fn(q, q, |i, j| rbf(&h[i], &h[j], ell, v) * epanechnikov(&h[i], &h[j], bw));
        prop_assert!(max_abs(&(g - oracle)) <= 1e-12);
    }
}

#[test]
fn delta_correction_skips_the_pivot_and_cross_grams() {
    let h = vec![vec![0.1], vec![0.7], vec![-0.4]];
    let fm = FeatureMatrix::from_rows(&h).unwrap();
    let spec = KernelSpec::Sum {
        terms: vec![
            KernelSpec::RickerWavelet {
                dilation: vec![1.0],
            },
            KernelSpec::DeltaCorrection {
                variance: 0.5,
                exclude_pivot: true,
            },
        ],
    };
    assert!(gram::<f64>(&spec, &fm, None, None).is_err());
    let g = to_dense(&gram::<f64>(&spec, &fm, None, Some(0)).unwrap());
    let base = ricker_dense(&h, 1.0, 1.0);
    let diff = g - &base;
    assert_eq!(diff[(0, 0)], 0.0);
    assert!((diff[(1, 1)] - 0.5).abs() < 1e-15 && (diff[(2, 2)] - 0.5).abs() < 1e-15);
    assert_eq!(diff[(1, 2)], 0.0);
    let cross = to_dense(&gram::<f64>(&spec, &fm, Some(&fm), None).unwrap());
    assert!(max_abs(&(cross - base)) < 1e-15);
}

#[test]
fn periodic_kernel_closed_form() {
    let spec = KernelSpec::Periodic {
        period: 1.0,
        lengthscale: 0.7,
        variance: 2.0,
    };
    let v = spec.eval(&[0.3], &[1.05]).unwrap();
    let s = (std::f64::consts::PI * 0.75).sin();
    assert!((v - 2.0 * (-2.0 * s * s / 0.49).exp()).abs() < 1e-14);
    assert!((spec.eval(&[0.2], &[3.2]).unwrap() - 2.0).abs() < 1e-12);
}
