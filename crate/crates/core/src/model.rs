//! The grouped prior: latent-function groups with pivot ordering, cross-function
//! covariance `K_hh`, inducing inputs `Z_r` and the GPRN output layout.
//!
//! Each group `r` has prior covariance `K_hh ⊗ K_xx`. `K_hh` is always handled
//! through its star-structured factor; `K_zz` stays dense.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dense::{DenseCholesky, Mat};
use crate::error::{GgpError, Result};
use crate::kernels::{FeatureMatrix, KernelSpec};
use crate::params::{ParamReader, ParamWriter};
use crate::scalar::{dot, lift, Real};
use crate::star::{
    build_star_cholesky, build_winged_precision, star_logdet, winged_precision_from_cholesky,
    SparseStarCholesky, StarCovariance, WingedPrecision,
};

/// Jitter added to the diagonal of `K_zz` before factorisation.
pub const INDUCING_JITTER: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparsityMode {
    /// Separable kernel; the pivot identity holds automatically.
    Implicit,
    /// Any kernel; only pivot-cross and diagonal covariances are evaluated.
    Explicit,
    /// `2Q − 1` free Cholesky parameters.
    Free,
}

/// Free parameterisation of a star factor. `pivot_column[0]` and `off_diag`
/// are stored in log-space.
#[derive(Clone, Debug, PartialEq)]
pub struct FreeCholParams<T> {
    pub pivot_column: Vec<T>,
    pub off_diag: Vec<T>,
}

impl<T: Real> FreeCholParams<T> {
    /// `(1, 0.1, …, 0.1)` pivot column with unit diagonal.
    pub fn initial(dim: usize) -> Self {
        let mut pivot_column = vec![T::cst(0.1); dim];
        pivot_column[0] = T::one();
        FreeCholParams {
            pivot_column,
            off_diag: vec![T::one(); dim.saturating_sub(1)],
        }
    }

    pub fn decode(&self) -> Result<SparseStarCholesky<T>> {
        SparseStarCholesky::new(self.pivot_column.clone(), self.off_diag.clone())
    }

    fn write_params(&self, w: &mut ParamWriter) {
        write_star(w, &self.pivot_column, &self.off_diag);
    }

    fn read_params<U: Real>(&self, r: &mut ParamReader<'_, U>) -> FreeCholParams<U> {
        let (pivot_column, off_diag) = read_star(r, self.pivot_column.len());
        FreeCholParams {
            pivot_column,
            off_diag,
        }
    }
}

pub(crate) fn write_star<T: Real>(w: &mut ParamWriter, pivot_column: &[T], off_diag: &[T]) {
    w.positive(pivot_column[0].value());
    for p in &pivot_column[1..] {
        w.raw(p.value());
    }
    for d in off_diag {
        w.positive(d.value());
    }
}

pub(crate) fn read_star<U: Real>(r: &mut ParamReader<'_, U>, dim: usize) -> (Vec<U>, Vec<U>) {
    let mut pc = Vec::with_capacity(dim);
    pc.push(r.positive());
    pc.extend(r.raw_vec(dim - 1));
    (pc, r.positive_vec(dim - 1))
}

/// Cross-function covariance of one group.
#[derive(Clone, Debug, PartialEq)]
pub enum CrossCovariance<T> {
    /// Kernel over the group's feature rows, normally including a
    /// pivot-excluding delta correction.
    Kernel(KernelSpec<T>),
    Free(FreeCholParams<T>),
    /// `K_hh = [1]`, used by singleton groups.
    Unit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupPrior<T> {
    pub group_id: usize,
    /// Latent-function indices, pivot first.
    pub members: Vec<usize>,
    pub mode: SparsityMode,
    /// One row per member, in member order.
    pub h_features: FeatureMatrix,
    pub x_kernel: KernelSpec<T>,
    pub h_cov: CrossCovariance<T>,
    /// Inducing inputs `Z_r`, `M × d`.
    pub inducing: Mat<T>,
}

impl<T: Real> GroupPrior<T> {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn inducing_count(&self) -> usize {
        self.inducing.rows()
    }

    pub fn pivot(&self) -> usize {
        self.members[0]
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(GgpError::InvalidModel(format!(
                "group {} has no members",
                self.group_id
            )));
        }
        if self.h_features.rows() != self.members.len() {
            return Err(GgpError::InvalidModel(format!(
                "group {}: {} feature rows for {} members",
                self.group_id,
                self.h_features.rows(),
                self.members.len()
            )));
        }
        if self.inducing.rows() == 0 {
            return Err(GgpError::InvalidModel(format!(
                "group {} has no inducing points",
                self.group_id
            )));
        }
        self.x_kernel.validate()?;
        match (&self.h_cov, self.mode) {
            (CrossCovariance::Kernel(k), mode) => {
                k.validate()?;
                if mode == SparsityMode::Free {
                    return Err(GgpError::InvalidModel(
                        "free mode requires free Cholesky parameters".into(),
                    ));
                }
                if mode == SparsityMode::Implicit && !k.without_delta().separable() {
                    return Err(GgpError::InvalidModel(format!(
                        "group {}: implicit sparsity needs a separable kernel",
                        self.group_id
                    )));
                }
            }
            (CrossCovariance::Free(f), _) => {
                if f.pivot_column.len() != self.size() || f.off_diag.len() + 1 != self.size() {
                    return Err(GgpError::InvalidModel(format!(
                        "group {}: free factor needs {} parameters",
                        self.group_id,
                        2 * self.size() - 1
                    )));
                }
            }
            (CrossCovariance::Unit, _) => {
                if self.size() != 1 {
                    return Err(GgpError::InvalidModel(
                        "unit cross covariance needs a singleton group".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Pivot variance, pivot-cross covariances and diagonal of `K_hh`.
    /// Off-pivot cross terms are never evaluated.
    pub fn h_star_covariance(&self) -> Result<StarCovariance<T>> {
        match &self.h_cov {
            CrossCovariance::Kernel(k) => {
                let q = self.size();
                let h0: Vec<T> = lift(self.h_features.row(0));
                let pivot_var = k.eval_indexed(&h0, &h0, (0, 0), Some(0))?;
                let mut cross = Vec::with_capacity(q - 1);
                let mut diag = Vec::with_capacity(q - 1);
                for i in 1..q {
                    let hi: Vec<T> = lift(self.h_features.row(i));
                    cross.push(k.eval_indexed(&hi, &h0, (i, 0), Some(0))?);
                    diag.push(k.eval_indexed(&hi, &hi, (i, i), Some(0))?);
                }
                StarCovariance::new(pivot_var, cross, diag)
            }
            CrossCovariance::Free(f) => Ok(StarCovariance::from_cholesky(&f.decode()?)),
            CrossCovariance::Unit => StarCovariance::new(T::one(), vec![], vec![]),
        }
    }

    /// Inducing gram `K_zz` (without jitter).
    pub fn inducing_gram(&self) -> Result<Mat<T>> {
        let m = self.inducing_count();
        let mut k = Mat::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let v = self
                    .x_kernel
                    .eval(self.inducing.row(i), self.inducing.row(j))?;
                k.set(i, j, v);
                k.set(j, i, v);
            }
        }
        Ok(k)
    }

    fn write_params(&self, w: &mut ParamWriter) {
        self.x_kernel.write_params(w);
        match &self.h_cov {
            CrossCovariance::Kernel(k) => k.write_params(w),
            CrossCovariance::Free(f) => f.write_params(w),
            CrossCovariance::Unit => {}
        }
        for v in self.inducing.as_slice() {
            w.raw(v.value());
        }
    }

    fn read_params<U: Real>(&self, r: &mut ParamReader<'_, U>) -> GroupPrior<U> {
        let x_kernel = self.x_kernel.read_params(r);
        let h_cov = match &self.h_cov {
            CrossCovariance::Kernel(k) => CrossCovariance::Kernel(k.read_params(r)),
            CrossCovariance::Free(f) => CrossCovariance::Free(f.read_params(r)),
            CrossCovariance::Unit => CrossCovariance::Unit,
        };
        let (m, d) = (self.inducing.rows(), self.inducing.cols());
        let inducing = Mat::from_vec(m, d, r.raw_vec(m * d)).expect("shape preserved");
        GroupPrior {
            group_id: self.group_id,
            members: self.members.clone(),
            mode: self.mode,
            h_features: self.h_features.clone(),
            x_kernel,
            h_cov,
            inducing,
        }
    }
}

/// Star factor of `K_hh` for one group, built in `O(Q_r)`.
pub fn group_h_cholesky<T: Real>(gp: &GroupPrior<T>) -> Result<SparseStarCholesky<T>> {
    match &gp.h_cov {
        CrossCovariance::Free(f) => f.decode(),
        CrossCovariance::Unit => Ok(SparseStarCholesky::identity(1)),
        CrossCovariance::Kernel(_) => build_star_cholesky(&gp.h_star_covariance()?, 0.0),
    }
}

/// Per-point conditional prior quantities `a = K_zz⁻¹ κ(Z, x)` and
/// `k̃ = κ(x, x) − κ(x, Z) a`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalPrior<T> {
    pub a_vec: Vec<T>,
    pub k_tilde: T,
}

/// Everything about a group that depends only on its hyperparameters:
/// factors, precisions and log-determinants.
#[derive(Clone, Debug)]
pub struct PreparedGroup<T> {
    pub h_chol: SparseStarCholesky<T>,
    pub h_cov: StarCovariance<T>,
    pub h_prec: WingedPrecision<T>,
    pub h_logdet: T,
    pub zz_chol: DenseCholesky<T>,
    pub zz_logdet: T,
}

impl<T: Real> PreparedGroup<T> {
    pub fn new(gp: &GroupPrior<T>) -> Result<Self> {
        let h_cov = gp.h_star_covariance()?;
        let h_chol = match &gp.h_cov {
            CrossCovariance::Free(f) => f.decode()?,
            CrossCovariance::Unit => SparseStarCholesky::identity(1),
            CrossCovariance::Kernel(_) => build_star_cholesky(&h_cov, 0.0)?,
        };
        let h_prec = match &gp.h_cov {
            CrossCovariance::Kernel(_) => build_winged_precision(&h_cov)?,
            _ => winged_precision_from_cholesky(&h_chol)?,
        };
        let h_logdet = star_logdet(&h_chol)?;
        let zz_chol = DenseCholesky::new(&gp.inducing_gram()?, INDUCING_JITTER)?;
        let zz_logdet = zz_chol.logdet();
        Ok(PreparedGroup {
            h_chol,
            h_cov,
            h_prec,
            h_logdet,
            zz_chol,
            zz_logdet,
        })
    }

    pub fn conditional_prior_at(&self, gp: &GroupPrior<T>, x: &[T]) -> Result<ConditionalPrior<T>> {
        let m = gp.inducing_count();
        let mut kzx = Vec::with_capacity(m);
        for i in 0..m {
            kzx.push(gp.x_kernel.eval(gp.inducing.row(i), x)?);
        }
        let kxx = gp.x_kernel.eval(x, x)?;
        let v = self.zz_chol.forward_solve(&kzx);
        let k_tilde = (kxx - dot(&v, &v)).clamp_nonneg();
        let a_vec = self.zz_chol.backward_solve(&v);
        Ok(ConditionalPrior { a_vec, k_tilde })
    }
}

/// Convenience wrapper that prepares the group on every call.
pub fn conditional_prior_at<T: Real>(gp: &GroupPrior<T>, x: &[T]) -> Result<ConditionalPrior<T>> {
    PreparedGroup::new(gp)?.conditional_prior_at(gp, x)
}

/// A reordering of a member list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    /// Position `k` of the reordered list holds original position `indices[k]`.
    pub indices: Vec<usize>,
}

impl Permutation {
    pub fn apply<X: Clone>(&self, xs: &[X]) -> Vec<X> {
        self.indices.iter().map(|&i| xs[i].clone()).collect()
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.indices.len()];
        for (k, &i) in self.indices.iter().enumerate() {
            inv[i] = k;
        }
        Permutation { indices: inv }
    }

    pub fn is_identity(&self) -> bool {
        self.indices.iter().enumerate().all(|(k, &i)| k == i)
    }
}

/// Moves `pivot` to the front of `members`, keeping the others in order.
pub fn reorder_for_pivot(members: &[usize], pivot: usize) -> Result<Permutation> {
    let at = members
        .iter()
        .position(|&m| m == pivot)
        .ok_or(GgpError::PivotNotMember(pivot))?;
    let mut indices = Vec::with_capacity(members.len());
    indices.push(at);
    indices.extend((0..members.len()).filter(|&i| i != at));
    Ok(Permutation { indices })
}

/// Output layout `y = W g`: `P × Q_g` weight functions followed by `Q_g`
/// node functions in the latent index space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GprnStructure {
    pub tasks: usize,
    pub nodes: usize,
}

impl GprnStructure {
    pub fn q_total(&self) -> usize {
        self.nodes * (self.tasks + 1)
    }

    pub fn weight_index(&self, task: usize, node: usize) -> usize {
        task * self.nodes + node
    }

    pub fn node_index(&self, node: usize) -> usize {
        self.tasks * self.nodes + node
    }

    /// Row-group members for task `i`, pivot `W_ii` first. Needs `Q_g = P`.
    pub fn row_group(&self, task: usize) -> Result<Vec<usize>> {
        if self.nodes != self.tasks {
            return Err(GgpError::InvalidModel(
                "row-group pivots need as many nodes as tasks".into(),
            ));
        }
        let members: Vec<usize> = (0..self.nodes)
            .map(|j| self.weight_index(task, j))
            .collect();
        let perm = reorder_for_pivot(&members, self.weight_index(task, task))?;
        Ok(perm.apply(&members))
    }

    /// `W g` for one latent vector `f` of length `q_total`.
    pub fn combine<T: Real>(&self, f: &[T], out: &mut [T]) {
        let g = &f[self.tasks * self.nodes..];
        for (i, o) in out.iter_mut().enumerate().take(self.tasks) {
            *o = dot(&f[i * self.nodes..(i + 1) * self.nodes], g);
        }
    }
}

/// Prior over all groups plus the diagonal output noise.
#[derive(Clone, Debug, PartialEq)]
pub struct GgpModel<T> {
    pub structure: GprnStructure,
    pub groups: Vec<GroupPrior<T>>,
    /// Diagonal of `Σ_y`, one entry per task.
    pub noise_var: Vec<T>,
}

impl<T: Real> GgpModel<T> {
    pub fn validate(&self) -> Result<()> {
        let q = self.structure.q_total();
        let mut seen = vec![false; q];
        for g in &self.groups {
            g.validate()?;
            for &m in &g.members {
                if m >= q {
                    return Err(GgpError::InvalidModel(format!(
                        "latent index {m} out of range {q}"
                    )));
                }
                if std::mem::replace(&mut seen[m], true) {
                    return Err(GgpError::InvalidModel(format!(
                        "latent function {m} belongs to more than one group"
                    )));
                }
            }
        }
        if let Some(m) = seen.iter().position(|s| !s) {
            return Err(GgpError::InvalidModel(format!(
                "latent function {m} is not assigned to a group"
            )));
        }
        if self.noise_var.len() != self.structure.tasks {
            return Err(GgpError::InvalidModel(
                "noise needs one entry per task".into(),
            ));
        }
        let d = self.input_dim();
        if self.groups.iter().any(|g| g.inducing.cols() != d) {
            return Err(GgpError::InvalidModel(
                "inducing inputs have inconsistent widths".into(),
            ));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.groups.first().map_or(0, |g| g.inducing.cols())
    }

    /// `(group, position)` of every latent function.
    pub fn latent_locations(&self) -> Vec<(usize, usize)> {
        let mut loc = vec![(0, 0); self.structure.q_total()];
        for (r, g) in self.groups.iter().enumerate() {
            for (j, &m) in g.members.iter().enumerate() {
                loc[m] = (r, j);
            }
        }
        loc
    }

    pub fn prepare(&self) -> Result<Vec<PreparedGroup<T>>> {
        self.groups.iter().map(PreparedGroup::new).collect()
    }

    pub fn write_params(&self, w: &mut ParamWriter) {
        for g in &self.groups {
            g.write_params(w);
        }
        for v in &self.noise_var {
            w.positive(v.value());
        }
    }

    pub fn read_params<U: Real>(&self, r: &mut ParamReader<'_, U>) -> GgpModel<U> {
        let groups = self.groups.iter().map(|g| g.read_params(r)).collect();
        GgpModel {
            structure: self.structure,
            groups,
            noise_var: r.positive_vec(self.noise_var.len()),
        }
    }
}

/// Inducing-point count under the rule `R · M³ ≈ const`, relative to a
/// baseline of `baseline_m` points with `baseline_groups` groups.
pub fn standardized_inducing_count(
    baseline_m: usize,
    baseline_groups: usize,
    groups: usize,
) -> usize {
    let scale = (baseline_groups as f64 / groups.max(1) as f64).cbrt();
    ((baseline_m as f64 * scale).round() as usize).max(1)
}

/// Picks `m` distinct training rows by D²-sampling under the kernel-induced
/// distance `2 − 2 κ(a, b) / √(κ(a, a) κ(b, b))`.
pub fn init_inducing<R: Rng>(
    kernel: &KernelSpec,
    inputs: &Mat<f64>,
    m: usize,
    rng: &mut R,
) -> Result<Mat<f64>> {
    let n = inputs.rows();
    if n == 0 {
        return Err(GgpError::EmptyAfterFilter);
    }
    let m = m.min(n);
    let self_k: Vec<f64> = (0..n)
        .map(|i| kernel.eval(inputs.row(i), inputs.row(i)))
        .collect::<Result<_>>()?;
    let dist = |i: usize, j: usize| -> Result<f64> {
        let k = kernel.eval(inputs.row(i), inputs.row(j))?;
        Ok((2.0 - 2.0 * k / (self_k[i] * self_k[j]).sqrt()).max(0.0))
    };
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut best: Vec<f64> = (0..n).map(|i| dist(i, chosen[0])).collect::<Result<_>>()?;
    while chosen.len() < m {
        let total: f64 = best.iter().sum();
        let next = if total <= 0.0 {
            match (0..n).find(|i| !chosen.contains(i)) {
                Some(i) => i,
                None => break,
            }
        } else {
            let mut u = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &b) in best.iter().enumerate() {
                if u < b {
                    pick = i;
                    break;
                }
                u -= b;
            }
            pick
        };
        chosen.push(next);
        for (i, b) in best.iter_mut().enumerate() {
            *b = b.min(dist(i, next)?);
        }
    }
    let d = inputs.cols();
    let mut out = Vec::with_capacity(chosen.len() * d);
    for &i in &chosen {
        out.extend_from_slice(inputs.row(i));
    }
    Mat::from_vec(chosen.len(), d, out)
}

/// Default cross-function kernel for each sparsity mode.
pub fn default_h_covariance(
    mode: SparsityMode,
    size: usize,
    h_dims: usize,
    settings: &HKernelSettings,
) -> CrossCovariance<f64> {
    let delta = KernelSpec::DeltaCorrection {
        variance: settings.delta_variance,
        exclude_pivot: true,
    };
    match mode {
        SparsityMode::Implicit => CrossCovariance::Kernel(KernelSpec::Sum {
            terms: vec![
                KernelSpec::Product {
                    factors: vec![
                        KernelSpec::Constant {
                            value: settings.variance,
                        },
                        KernelSpec::RickerWavelet {
                            dilation: vec![settings.dilation; h_dims.max(1)],
                        },
                    ],
                },
                delta,
            ],
        }),
        SparsityMode::Explicit => CrossCovariance::Kernel(KernelSpec::Sum {
            terms: vec![
                KernelSpec::Product {
                    factors: vec![
                        KernelSpec::Rbf {
                            lengthscales: vec![settings.lengthscale; h_dims.max(1)],
                            variance: settings.variance,
                        },
                        KernelSpec::Epanechnikov {
                            bandwidth: settings.bandwidth,
                        },
                    ],
                },
                delta,
            ],
        }),
        SparsityMode::Free => CrossCovariance::Free(FreeCholParams::initial(size)),
    }
}

/// Initial values for the cross-function kernels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HKernelSettings {
    pub variance: f64,
    pub delta_variance: f64,
    /// Wavelet dilation (implicit mode).
    pub dilation: f64,
    /// RBF lengthscale (explicit mode).
    pub lengthscale: f64,
    /// Epanechnikov bandwidth (explicit mode).
    pub bandwidth: f64,
}

impl Default for HKernelSettings {
    fn default() -> Self {
        HKernelSettings {
            variance: 1.0,
            delta_variance: 0.1,
            dilation: 3.0,
            lengthscale: 1.0,
            bandwidth: 4.0,
        }
    }
}

/// Entry `(i, j)` of the covariance implied by a star factor. Off-pivot pairs
/// are `κ_i0 κ_0j / κ_00`.
pub fn implied_cross_covariance<T: Real>(cov: &StarCovariance<T>, i: usize, j: usize) -> T {
    match (i, j) {
        (0, 0) => cov.pivot_var,
        (0, k) | (k, 0) => cov.cross[k - 1],
        (a, b) if a == b => cov.diag[a - 1],
        (a, b) => cov.cross[a - 1] * cov.cross[b - 1] / cov.pivot_var,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::gram;
    use approx::assert_relative_eq;

    fn group(mode: SparsityMode, h: &[f64], h_cov: CrossCovariance<f64>) -> GroupPrior<f64> {
        GroupPrior {
            group_id: 0,
            members: (0..h.len()).collect(),
            mode,
            h_features: FeatureMatrix::column(h).unwrap(),
            x_kernel: KernelSpec::Rbf {
                lengthscales: vec![1.0],
                variance: 1.0,
            },
            h_cov,
            inducing: Mat::from_vec(2, 1, vec![0.0, 1.0]).unwrap(),
        }
    }

    #[test]
    fn reorder_examples() {
        let p = reorder_for_pivot(&[3, 7, 9], 7).unwrap();
        assert_eq!(p.apply(&[3, 7, 9]), vec![7, 3, 9]);
        let p = reorder_for_pivot(&[3, 7, 9], 3).unwrap();
        assert!(p.is_identity());
        let m: Vec<usize> = (0..5).collect();
        let p = reorder_for_pivot(&m, 4).unwrap();
        assert_eq!(p.apply(&m), vec![4, 0, 1, 2, 3]);
        assert_eq!(p.inverse().apply(&p.apply(&m)), m);
        assert!(matches!(
            reorder_for_pivot(&m, 9),
            Err(GgpError::PivotNotMember(9))
        ));
    }

    #[test]
    fn free_identity_factor() {
        let f = FreeCholParams {
            pivot_column: vec![0f64.exp(), 0.0, 0.0],
            off_diag: vec![0f64.exp(), 0f64.exp()],
        };
        let g = group(
            SparsityMode::Free,
            &[0.0, 1.0, 2.0],
            CrossCovariance::Free(f),
        );
        assert_eq!(
            group_h_cholesky(&g).unwrap(),
            SparseStarCholesky::<f64>::identity(3)
        );
    }

    #[test]
    fn explicit_degenerate_features_restored_by_delta() {
        let s2: f64 = 0.04;
        let k = KernelSpec::Sum {
            terms: vec![
                KernelSpec::Product {
                    factors: vec![
                        KernelSpec::Rbf {
                            lengthscales: vec![1.0],
                            variance: 2.0,
                        },
                        KernelSpec::Epanechnikov { bandwidth: 1.0 },
                    ],
                },
                KernelSpec::DeltaCorrection {
                    variance: s2,
                    exclude_pivot: true,
                },
            ],
        };
        let g = group(
            SparsityMode::Explicit,
            &[0.5, 0.5, 0.5],
            CrossCovariance::Kernel(k),
        );
        let cov = g.h_star_covariance().unwrap();
        assert_eq!(cov.cross, vec![2.0, 2.0]);
        let l = group_h_cholesky(&g).unwrap();
        for d in &l.off_diag {
            assert_relative_eq!(*d, s2.sqrt(), epsilon = 1e-12);
        }
    }

    #[test]
    fn implicit_requires_separable_kernel() {
        let g = group(
            SparsityMode::Implicit,
            &[0.0, 1.0],
            CrossCovariance::Kernel(KernelSpec::Rbf {
                lengthscales: vec![1.0],
                variance: 1.0,
            }),
        );
        assert!(g.validate().is_err());
    }

    #[test]
    fn implicit_factor_reconstructs_full_gram() {
        let k = KernelSpec::Sum {
            terms: vec![
                KernelSpec::RickerWavelet {
                    dilation: vec![1.0],
                },
                KernelSpec::DeltaCorrection {
                    variance: 0.2,
                    exclude_pivot: true,
                },
            ],
        };
        let h = [0.1, 0.5, 0.9];
        let g = group(
            SparsityMode::Implicit,
            &h,
            CrossCovariance::Kernel(k.clone()),
        );
        g.validate().unwrap();
        let l = group_h_cholesky(&g).unwrap();
        let full = gram(&k, &g.h_features, None, Some(0)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut v = 0.0;
                for c in 0..3 {
                    let lic = if c == 0 {
                        l.pivot_column[i]
                    } else if c == i {
                        l.off_diag[i - 1]
                    } else {
                        0.0
                    };
                    let ljc = if c == 0 {
                        l.pivot_column[j]
                    } else if c == j {
                        l.off_diag[j - 1]
                    } else {
                        0.0
                    };
                    v += lic * ljc;
                }
                assert_relative_eq!(v, full.get(i, j), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn conditional_prior_scalar_case() {
        // κ(x,x) = κ(z,z) = 1, κ(x,z) = 0.5 via an RBF with the right distance
        let ell = 1.0 / (2.0 * 2f64.ln()).sqrt();
        let g = GroupPrior {
            group_id: 0,
            members: vec![0],
            mode: SparsityMode::Free,
            h_features: FeatureMatrix::column(&[0.0]).unwrap(),
            x_kernel: KernelSpec::Rbf {
                lengthscales: vec![ell],
                variance: 1.0,
            },
            h_cov: CrossCovariance::Unit,
            inducing: Mat::from_vec(1, 1, vec![0.0]).unwrap(),
        };
        let c = conditional_prior_at(&g, &[1.0]).unwrap();
        assert_relative_eq!(c.a_vec[0], 0.5, epsilon = 1e-6);
        assert_relative_eq!(c.k_tilde, 0.75, epsilon = 1e-6);
    }

    #[test]
    fn conditional_prior_limits() {
        let g = group(SparsityMode::Free, &[0.0], CrossCovariance::Unit);
        let at = conditional_prior_at(&g, &[1.0]).unwrap();
        assert_relative_eq!(at.a_vec[0], 0.0, epsilon = 1e-5);
        assert_relative_eq!(at.a_vec[1], 1.0, epsilon = 1e-5);
        assert!(at.k_tilde < 1e-5);
        let far = conditional_prior_at(&g, &[40.0]).unwrap();
        assert!(far.a_vec.iter().all(|a| a.abs() < 1e-12));
        assert_relative_eq!(far.k_tilde, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gprn_layout() {
        let s = GprnStructure { tasks: 3, nodes: 3 };
        assert_eq!(s.q_total(), 12);
        assert_eq!(s.row_group(1).unwrap(), vec![4, 3, 5]);
        assert_eq!(s.node_index(2), 11);
        let f: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let mut y = vec![0.0; 3];
        s.combine(&f, &mut y);
        assert_eq!(y[0], 0.0 * 9.0 + 1.0 * 10.0 + 2.0 * 11.0);
        assert!(GprnStructure { tasks: 3, nodes: 2 }.row_group(0).is_err());
    }

    #[test]
    fn standardized_m() {
        assert_eq!(standardized_inducing_count(200, 1, 1), 200);
        assert_eq!(standardized_inducing_count(200, 1, 8), 100);
    }

    #[test]
    fn inducing_init_picks_distinct_rows() {
        use rand::SeedableRng;
        let x = Mat::from_fn(50, 1, |i, _| i as f64 * 0.1);
        let k = KernelSpec::Rbf {
            lengthscales: vec![0.5],
            variance: 1.0,
        };
        let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(1);
        let z = init_inducing(&k, &x, 8, &mut rng).unwrap();
        let mut vals: Vec<f64> = z.as_slice().to_vec();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        assert_eq!(vals.len(), 8);
    }
}
