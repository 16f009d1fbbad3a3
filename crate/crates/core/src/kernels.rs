//! Kernel functions over inputs and over cross-function features.
//!
//! A [`KernelSpec`] is a declarative kernel tree. Leaves are the base kernels;
//! `Product`, `Sum` and `Columns` combine or restrict them. The delta
//! correction is keyed on row indices, so it only has meaning inside a gram
//! matrix and is rejected by pointwise evaluation.
//!
//! Multiplicatively separable kernels (`κ(h, h') = φ(h) ψ(h')`) satisfy the
//! pivot conditional-independence identity exactly; [`verify_implicit_sparsity`]
//! checks this numerically.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dense::Mat;
use crate::error::{check_len, GgpError, Result};
use crate::params::{ParamReader, ParamWriter};
use crate::scalar::{lift, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSpec<T = f64> {
    /// `v · exp(−½ Σ_d ((a_d − b_d)/ℓ_d)²)`; a single lengthscale is shared
    /// across dimensions.
    Rbf {
        lengthscales: Vec<T>,
        variance: T,
    },
    /// `v · exp(−2 Σ_d sin²(π (a_d − b_d)/p) / ℓ²)`. The period is held fixed
    /// during optimisation.
    Periodic {
        period: T,
        lengthscale: T,
        variance: T,
    },
    /// `max(0, 1 − (‖a − b‖ / bw)²)`.
    Epanechnikov {
        bandwidth: T,
    },
    /// Dot-product wavelet `Π_d ψ(a_d/c_d) ψ(b_d/c_d)`, `ψ(t) = (1 − t²) e^{−t²/2}`.
    RickerWavelet {
        dilation: Vec<T>,
    },
    Constant {
        value: T,
    },
    /// Adds `variance` on the diagonal of a self-gram, optionally skipping the
    /// pivot row.
    DeltaCorrection {
        variance: T,
        exclude_pivot: bool,
    },
    Product {
        factors: Vec<KernelSpec<T>>,
    },
    Sum {
        terms: Vec<KernelSpec<T>>,
    },
    /// Applies `kernel` to the listed input columns only.
    Columns {
        columns: Vec<usize>,
        kernel: Box<KernelSpec<T>>,
    },
}

/// Mexican-hat mother wavelet.
#[inline]
pub fn ricker<T: Real>(t: T) -> T {
    let t2 = t * t;
    (T::one() - t2) * (t2 * -0.5).exp()
}

impl<T: Real> KernelSpec<T> {
    /// Separable kernels factor as `φ(a) ψ(b)`.
    pub fn separable(&self) -> bool {
        match self {
            KernelSpec::RickerWavelet { .. } | KernelSpec::Constant { .. } => true,
            KernelSpec::Rbf { .. }
            | KernelSpec::Periodic { .. }
            | KernelSpec::Epanechnikov { .. }
            | KernelSpec::DeltaCorrection { .. }
            | KernelSpec::Sum { .. } => false,
            KernelSpec::Product { factors } => {
                !factors.is_empty() && factors.iter().all(|f| f.separable())
            }
            KernelSpec::Columns { kernel, .. } => kernel.separable(),
        }
    }

    pub fn contains_delta(&self) -> bool {
        match self {
            KernelSpec::DeltaCorrection { .. } => true,
            KernelSpec::Product { factors: ks } | KernelSpec::Sum { terms: ks } => {
                ks.iter().any(|k| k.contains_delta())
            }
            KernelSpec::Columns { kernel, .. } => kernel.contains_delta(),
            _ => false,
        }
    }

    fn needs_pivot(&self) -> bool {
        match self {
            KernelSpec::DeltaCorrection { exclude_pivot, .. } => *exclude_pivot,
            KernelSpec::Product { factors: ks } | KernelSpec::Sum { terms: ks } => {
                ks.iter().any(|k| k.needs_pivot())
            }
            KernelSpec::Columns { kernel, .. } => kernel.needs_pivot(),
            _ => false,
        }
    }

    /// Copy of the tree with every delta correction removed from sums.
    pub fn without_delta(&self) -> KernelSpec<T> {
        match self {
            KernelSpec::Sum { terms } => {
                let kept: Vec<_> = terms
                    .iter()
                    .filter(|t| !matches!(t, KernelSpec::DeltaCorrection { .. }))
                    .map(|t| t.without_delta())
                    .collect();
                if kept.len() == 1 {
                    kept.into_iter().next().unwrap()
                } else {
                    KernelSpec::Sum { terms: kept }
                }
            }
            KernelSpec::Product { factors } => KernelSpec::Product {
                factors: factors.iter().map(|f| f.without_delta()).collect(),
            },
            KernelSpec::Columns { columns, kernel } => KernelSpec::Columns {
                columns: columns.clone(),
                kernel: Box::new(kernel.without_delta()),
            },
            other => other.clone(),
        }
    }

    /// Checks scale parameters and structure.
    pub fn validate(&self) -> Result<()> {
        let pos = |v: &T, what: &str| -> Result<()> {
            if v.value() > 0.0 && v.value().is_finite() {
                Ok(())
            } else {
                Err(GgpError::InvalidModel(format!(
                    "{what} must be positive, got {}",
                    v.value()
                )))
            }
        };
        match self {
            KernelSpec::Rbf {
                lengthscales,
                variance,
            } => {
                if lengthscales.is_empty() {
                    return Err(GgpError::InvalidModel("rbf needs a lengthscale".into()));
                }
                lengthscales
                    .iter()
                    .try_for_each(|l| pos(l, "rbf lengthscale"))?;
                pos(variance, "rbf variance")
            }
            KernelSpec::Periodic {
                period,
                lengthscale,
                variance,
            } => {
                pos(period, "period")?;
                pos(lengthscale, "periodic lengthscale")?;
                pos(variance, "periodic variance")
            }
            KernelSpec::Epanechnikov { bandwidth } => pos(bandwidth, "bandwidth"),
            KernelSpec::RickerWavelet { dilation } => {
                if dilation.is_empty() {
                    return Err(GgpError::InvalidModel("wavelet needs a dilation".into()));
                }
                dilation.iter().try_for_each(|c| pos(c, "dilation"))
            }
            KernelSpec::Constant { value } => pos(value, "constant"),
            KernelSpec::DeltaCorrection { variance, .. } => pos(variance, "delta variance"),
            KernelSpec::Product { factors: ks } | KernelSpec::Sum { terms: ks } => {
                if ks.is_empty() {
                    return Err(GgpError::InvalidModel("empty kernel combination".into()));
                }
                ks.iter().try_for_each(|k| k.validate())
            }
            KernelSpec::Columns { columns, kernel } => {
                if columns.is_empty() {
                    return Err(GgpError::InvalidModel("empty column selection".into()));
                }
                kernel.validate()
            }
        }
    }

    /// Pointwise evaluation. Fails on delta corrections.
    pub fn eval(&self, a: &[T], b: &[T]) -> Result<T> {
        check_len(a.len(), b.len())?;
        self.eval_at(a, b, None, None)
    }

    /// Evaluation with row indices, which gives the delta correction meaning.
    pub fn eval_indexed(
        &self,
        a: &[T],
        b: &[T],
        rows: (usize, usize),
        pivot: Option<usize>,
    ) -> Result<T> {
        check_len(a.len(), b.len())?;
        if pivot.is_none() && self.needs_pivot() {
            return Err(GgpError::MissingPivot);
        }
        self.eval_at(a, b, Some(rows), pivot)
    }

    fn eval_at(
        &self,
        a: &[T],
        b: &[T],
        rows: Option<(usize, usize)>,
        pivot: Option<usize>,
    ) -> Result<T> {
        Ok(match self {
            KernelSpec::Rbf {
                lengthscales,
                variance,
            } => {
                let mut s = T::zero();
                for d in 0..a.len() {
                    let ell = if lengthscales.len() == 1 {
                        lengthscales[0]
                    } else {
                        *lengthscales.get(d).ok_or(GgpError::DimensionMismatch {
                            expected: lengthscales.len(),
                            got: a.len(),
                        })?
                    };
                    let r = (a[d] - b[d]) / ell;
                    s += r * r;
                }
                *variance * (s * -0.5).exp()
            }
            KernelSpec::Periodic {
                period,
                lengthscale,
                variance,
            } => {
                let mut s = T::zero();
                for d in 0..a.len() {
                    let sn = ((a[d] - b[d]) * PI / *period).sin();
                    s += sn * sn;
                }
                *variance * (s * -2.0 / (*lengthscale * *lengthscale)).exp()
            }
            KernelSpec::Epanechnikov { bandwidth } => {
                let mut s = T::zero();
                for d in 0..a.len() {
                    let r = a[d] - b[d];
                    s += r * r;
                }
                (T::one() - s / (*bandwidth * *bandwidth)).clamp_nonneg()
            }
            KernelSpec::RickerWavelet { dilation } => {
                let mut p = T::one();
                for d in 0..a.len() {
                    let c = if dilation.len() == 1 {
                        dilation[0]
                    } else {
                        *dilation.get(d).ok_or(GgpError::DimensionMismatch {
                            expected: dilation.len(),
                            got: a.len(),
                        })?
                    };
                    p *= ricker(a[d] / c) * ricker(b[d] / c);
                }
                p
            }
            KernelSpec::Constant { value } => *value,
            KernelSpec::DeltaCorrection {
                variance,
                exclude_pivot,
            } => {
                let (i, j) = rows.ok_or(GgpError::PointwiseDeltaUnsupported)?;
                if i != j || (*exclude_pivot && pivot == Some(i)) {
                    T::zero()
                } else {
                    *variance
                }
            }
            KernelSpec::Product { factors } => {
                let mut p = T::one();
                for f in factors {
                    p *= f.eval_at(a, b, rows, pivot)?;
                }
                p
            }
            KernelSpec::Sum { terms } => {
                let mut s = T::zero();
                for t in terms {
                    s += t.eval_at(a, b, rows, pivot)?;
                }
                s
            }
            KernelSpec::Columns { columns, kernel } => {
                let mut sa = Vec::with_capacity(columns.len());
                let mut sb = Vec::with_capacity(columns.len());
                for &c in columns {
                    if c >= a.len() {
                        return Err(GgpError::DimensionMismatch {
                            expected: c + 1,
                            got: a.len(),
                        });
                    }
                    sa.push(a[c]);
                    sb.push(b[c]);
                }
                kernel.eval_at(&sa, &sb, rows, pivot)?
            }
        })
    }

    /// Appends the unconstrained (log-space) hyperparameters.
    pub fn write_params(&self, w: &mut ParamWriter) {
        match self {
            KernelSpec::Rbf {
                lengthscales,
                variance,
            } => {
                for l in lengthscales {
                    w.positive(l.value());
                }
                w.positive(variance.value());
            }
            KernelSpec::Periodic {
                lengthscale,
                variance,
                ..
            } => {
                w.positive(lengthscale.value());
                w.positive(variance.value());
            }
            KernelSpec::Epanechnikov { bandwidth } => w.positive(bandwidth.value()),
            KernelSpec::RickerWavelet { dilation } => {
                for c in dilation {
                    w.positive(c.value());
                }
            }
            KernelSpec::Constant { value } => w.positive(value.value()),
            KernelSpec::DeltaCorrection { variance, .. } => w.positive(variance.value()),
            KernelSpec::Product { factors: ks } | KernelSpec::Sum { terms: ks } => {
                ks.iter().for_each(|k| k.write_params(w))
            }
            KernelSpec::Columns { kernel, .. } => kernel.write_params(w),
        }
    }

    /// Rebuilds the tree over another scalar type from unconstrained values.
    pub fn read_params<U: Real>(&self, r: &mut ParamReader<'_, U>) -> KernelSpec<U> {
        match self {
            KernelSpec::Rbf { lengthscales, .. } => KernelSpec::Rbf {
                lengthscales: r.positive_vec(lengthscales.len()),
                variance: r.positive(),
            },
            KernelSpec::Periodic { period, .. } => KernelSpec::Periodic {
                period: U::cst(period.value()),
                lengthscale: r.positive(),
                variance: r.positive(),
            },
            KernelSpec::Epanechnikov { .. } => KernelSpec::Epanechnikov {
                bandwidth: r.positive(),
            },
            KernelSpec::RickerWavelet { dilation } => KernelSpec::RickerWavelet {
                dilation: r.positive_vec(dilation.len()),
            },
            KernelSpec::Constant { .. } => KernelSpec::Constant {
                value: r.positive(),
            },
            KernelSpec::DeltaCorrection { exclude_pivot, .. } => KernelSpec::DeltaCorrection {
                variance: r.positive(),
                exclude_pivot: *exclude_pivot,
            },
            KernelSpec::Product { factors } => KernelSpec::Product {
                factors: factors.iter().map(|f| f.read_params(r)).collect(),
            },
            KernelSpec::Sum { terms } => KernelSpec::Sum {
                terms: terms.iter().map(|t| t.read_params(r)).collect(),
            },
            KernelSpec::Columns { columns, kernel } => KernelSpec::Columns {
                columns: columns.clone(),
                kernel: Box::new(kernel.read_params(r)),
            },
        }
    }

    pub fn values(&self) -> KernelSpec<f64> {
        let mut w = ParamWriter::new();
        self.write_params(&mut w);
        let v = w.finish();
        self.read_params(&mut ParamReader::new(&v))
    }
}

/// Row-major matrix of feature vectors, one row per point or function.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    dims: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, dims: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 {
            return Err(GgpError::ShapeMismatch("feature matrix has no rows".into()));
        }
        check_len(rows * dims, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(GgpError::ShapeMismatch(
                "feature matrix has non-finite entries".into(),
            ));
        }
        Ok(FeatureMatrix { rows, dims, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dims = rows.first().map_or(0, |r| r.len());
        let mut values = Vec::with_capacity(rows.len() * dims);
        for r in rows {
            check_len(dims, r.len())?;
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), dims, values)
    }

    /// Single-column matrix.
    pub fn column(values: &[f64]) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dims..(i + 1) * self.dims]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Rows reordered by `perm` (row `k` of the result is row `perm[k]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for &p in perm {
            values.extend_from_slice(self.row(p));
        }
        FeatureMatrix {
            rows: perm.len(),
            dims: self.dims,
            values,
        }
    }
}

/// Gram matrix between the rows of `a` and `b`. With `b = None` the gram is
/// a self-gram of `a`, where delta corrections apply.
pub fn gram<T: Real>(
    spec: &KernelSpec<T>,
    a: &FeatureMatrix,
    b: Option<&FeatureMatrix>,
    pivot: Option<usize>,
) -> Result<Mat<T>> {
    let other = b.unwrap_or(a);
    check_len(a.dims(), other.dims())?;
    if b.is_none() && pivot.is_none() && spec.needs_pivot() {
        return Err(GgpError::MissingPivot);
    }
    let cross_spec = b.map(|_| spec.without_delta());
    let mut out = Mat::zeros(a.rows(), other.rows());
    for i in 0..a.rows() {
        let ai: Vec<T> = lift(a.row(i));
        for j in 0..other.rows() {
            let bj: Vec<T> = lift(other.row(j));
            // Rows of distinct matrices never share an index.
            let v = match &cross_spec {
                None => spec.eval_at(&ai, &bj, Some((i, j)), pivot)?,
                Some(k) => k.eval_at(&ai, &bj, None, None)?,
            };
            out.set(i, j, v);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImplicitSparsityReport {
    pub pivot: usize,
    pub max_violation: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Checks `κ(h_i, h_j) = κ(h_i, h_k) κ(h_k, h_k)⁻¹ κ(h_k, h_j)` for all `i, j`
/// with `k` the pivot. Delta corrections are ignored.
pub fn verify_implicit_sparsity(
    spec: &KernelSpec,
    h: &FeatureMatrix,
    pivot: usize,
    tol: f64,
) -> Result<ImplicitSparsityReport> {
    if pivot >= h.rows() {
        return Err(GgpError::PivotNotMember(pivot));
    }
    let k = spec.without_delta();
    let hk = h.row(pivot);
    let kkk = k.eval(hk, hk)?;
    if kkk.abs() < f64::MIN_POSITIVE {
        return Err(GgpError::PivotNotInvertible(pivot));
    }
    let to_pivot: Vec<f64> = (0..h.rows())
        .map(|i| k.eval(h.row(i), hk))
        .collect::<Result<_>>()?;
    let mut max_violation: f64 = 0.0;
    for i in 0..h.rows() {
        for j in 0..h.rows() {
            let direct = k.eval(h.row(i), h.row(j))?;
            let implied = to_pivot[i] * to_pivot[j] / kkk;
            max_violation = max_violation.max((direct - implied).abs());
        }
    }
    Ok(ImplicitSparsityReport {
        pivot,
        max_violation,
        tol,
        pass: max_violation <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ricker_spec() -> KernelSpec {
        KernelSpec::RickerWavelet {
            dilation: vec![1.0],
        }
    }

    #[test]
    fn pointwise_examples() {
        let w = KernelSpec::RickerWavelet {
            dilation: vec![0.37],
        };
        assert_eq!(w.eval(&[0.0], &[0.0]).unwrap(), 1.0);
        let rbf = KernelSpec::Rbf {
            lengthscales: vec![1.0],
            variance: 1.0,
        };
        assert_eq!(rbf.eval(&[0.3, -2.0], &[0.3, -2.0]).unwrap(), 1.0);
        // ψ(1) = 0 exactly, ψ(2) = −3e⁻²
        assert_eq!(ricker(2.0), -3.0 * (-2.0f64).exp());
        assert_eq!(ricker_spec().eval(&[1.0], &[2.0]).unwrap(), 0.0);
    }

    #[test]
    fn base_kernel_formulas() {
        let rbf = KernelSpec::Rbf {
            lengthscales: vec![2.0, 0.5],
            variance: 3.0,
        };
        let v = rbf.eval(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_relative_eq!(v, 3.0 * (-0.5 * (0.25 + 4.0f64)).exp(), epsilon = 1e-15);

        let per = KernelSpec::Periodic {
            period: 4.0,
            lengthscale: 0.5,
            variance: 2.0,
        };
        let v = per.eval(&[1.0], &[0.0]).unwrap();
        let s = (PI / 4.0).sin();
        assert_relative_eq!(v, 2.0 * (-2.0 * s * s / 0.25).exp(), epsilon = 1e-15);
        assert_relative_eq!(per.eval(&[5.0], &[1.0]).unwrap(), 2.0, epsilon = 1e-12);

        let ep = KernelSpec::Epanechnikov { bandwidth: 2.0 };
        assert_relative_eq!(ep.eval(&[1.0], &[0.0]).unwrap(), 0.75);
        assert_eq!(ep.eval(&[3.0], &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn columns_select_inputs() {
        let k = KernelSpec::Columns {
            columns: vec![1],
            kernel: Box::new(KernelSpec::Rbf {
                lengthscales: vec![1.0],
                variance: 1.0,
            }),
        };
        assert_eq!(k.eval(&[5.0, 1.0], &[-3.0, 1.0]).unwrap(), 1.0);
        assert!(k.eval(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn delta_requires_indices() {
        let d = KernelSpec::<f64>::DeltaCorrection {
            variance: 1.0,
            exclude_pivot: true,
        };
        assert!(matches!(
            d.eval(&[0.0], &[0.0]),
            Err(GgpError::PointwiseDeltaUnsupported)
        ));
        let h = FeatureMatrix::column(&[0.0, 1.0]).unwrap();
        assert!(matches!(
            gram(&d, &h, None, None),
            Err(GgpError::MissingPivot)
        ));
    }

    #[test]
    fn constant_gram() {
        let h = FeatureMatrix::column(&[0.0, 4.0, -1.0]).unwrap();
        let g = gram(&KernelSpec::Constant { value: 2.5 }, &h, None, None).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn wavelet_plus_delta_gram() {
        let s2 = 0.3;
        let spec = KernelSpec::Sum {
            terms: vec![
                ricker_spec(),
                KernelSpec::DeltaCorrection {
                    variance: s2,
                    exclude_pivot: true,
                },
            ],
        };
        let h = FeatureMatrix::column(&[0.0, 1.0, 2.0]).unwrap();
        let g = gram(&spec, &h, None, Some(0)).unwrap();
        assert_eq!(g.get(0, 0), 1.0);
        assert_eq!(g.get(1, 1), s2);
        assert_relative_eq!(g.get(2, 2), ricker(2.0f64).powi(2) + s2, epsilon = 1e-15);
        assert_eq!(g.get(0, 1), 0.0);
    }

    #[test]
    fn separability_flags() {
        let rbf = KernelSpec::Rbf {
            lengthscales: vec![1.0],
            variance: 1.0,
        };
        assert!(ricker_spec().separable());
        assert!(KernelSpec::Constant { value: 1.0 }.separable());
        assert!(!rbf.separable());
        assert!(!KernelSpec::Epanechnikov { bandwidth: 1.0 }.separable());
        let prod = KernelSpec::Product {
            factors: vec![KernelSpec::Constant { value: 2.0 }, ricker_spec()],
        };
        assert!(prod.separable());
        let mixed = KernelSpec::Product {
            factors: vec![rbf, ricker_spec()],
        };
        assert!(!mixed.separable());
    }

    #[test]
    fn implicit_sparsity_examples() {
        let h = FeatureMatrix::column(&[0.1, 0.5, 0.9]).unwrap();
        let r = verify_implicit_sparsity(&ricker_spec(), &h, 0, 1e-12).unwrap();
        assert!(r.pass && r.max_violation < 1e-12);

        let c = verify_implicit_sparsity(&KernelSpec::Constant { value: 0.7 }, &h, 2, 0.0).unwrap();
        assert!(c.pass);
        assert_eq!(c.max_violation, 0.0);

        let h = FeatureMatrix::column(&[0.0, 1.0, 2.0]).unwrap();
        let rbf = KernelSpec::Rbf {
            lengthscales: vec![1.0],
            variance: 1.0,
        };
        let r = verify_implicit_sparsity(&rbf, &h, 0, 1e-10).unwrap();
        assert!(!r.pass);
        // largest gap is on the far diagonal: 1 − e⁻⁴
        assert_relative_eq!(r.max_violation, 1.0 - (-4.0f64).exp(), epsilon = 1e-14);

        let h = FeatureMatrix::column(&[1.0, 0.5]).unwrap();
        assert!(matches!(
            verify_implicit_sparsity(&ricker_spec(), &h, 0, 1e-10),
            Err(GgpError::PivotNotInvertible(0))
        ));
    }

    #[test]
    fn param_round_trip_preserves_values() {
        let spec = KernelSpec::Product {
            factors: vec![
                KernelSpec::Columns {
                    columns: vec![0],
                    kernel: Box::new(KernelSpec::Periodic {
                        period: 144.0,
                        lengthscale: 0.8,
                        variance: 1.5,
                    }),
                },
                KernelSpec::Rbf {
                    lengthscales: vec![0.5, 2.0],
                    variance: 1.0,
                },
            ],
        };
        let back = spec.values();
        let a = [3.0, 0.1, -0.2];
        let b = [7.0, 0.4, 0.3];
        let shifted = KernelSpec::Product {
            factors: vec![
                spec_factor(&spec, 0),
                KernelSpec::Columns {
                    columns: vec![1, 2],
                    kernel: Box::new(spec_factor(&spec, 1)),
                },
            ],
        };
        let shifted_back = KernelSpec::Product {
            factors: vec![
                spec_factor(&back, 0),
                KernelSpec::Columns {
                    columns: vec![1, 2],
                    kernel: Box::new(spec_factor(&back, 1)),
                },
            ],
        };
        assert_relative_eq!(
            shifted.eval(&a, &b).unwrap(),
            shifted_back.eval(&a, &b).unwrap(),
            max_relative = 1e-14
        );
    }

    fn spec_factor(k: &KernelSpec, i: usize) -> KernelSpec {
        match k {
            KernelSpec::Product { factors } => factors[i].clone(),
            _ => unreachable!(),
        }
    }
}
