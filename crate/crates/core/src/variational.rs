//! Variational family over inducing values and the three ELBO components.
//!
//! A posterior component holds, per group, a mean of length `M·Q_r` stored
//! function-major (`Q_r` blocks of `M`) and either a diagonal covariance or a
//! Kronecker factor pair `S = S_b ⊗ S_w`. The product is never formed.

use std::f64::consts::{E, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dense::Mat;
use crate::error::{GgpError, Result};
use crate::model::{read_star, write_star, ConditionalPrior, GgpModel, PreparedGroup};
use crate::params::{ParamReader, ParamWriter};
use crate::rng::{self, normals, tag};
use crate::scalar::{dot, lift, log_sum_exp, sum, Real};
use crate::star::{kron_logdet, star_logdet, SparseStarCholesky, StarCovariance};

/// Tolerance below which a negative conditional variance is an error.
pub const NEGATIVE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosteriorKind {
    Diagonal,
    Kronecker,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PosteriorCov<T> {
    /// Variances of length `M·Q_r`, function-major.
    Diagonal(Vec<T>),
    Kronecker {
        between: SparseStarCholesky<T>,
        within: SparseStarCholesky<T>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupPosterior<T> {
    pub mean: Vec<T>,
    pub cov: PosteriorCov<T>,
}

impl<T: Real> GroupPosterior<T> {
    /// Mean block of function `j`.
    pub fn mean_block(&self, j: usize, m: usize) -> &[T] {
        &self.mean[j * m..(j + 1) * m]
    }

    /// `log det S`.
    pub fn logdet(&self, q: usize, m: usize) -> Result<T> {
        match &self.cov {
            PosteriorCov::Diagonal(s) => Ok(sum(s.iter().map(|v| v.ln()))),
            PosteriorCov::Kronecker { between, within } => Ok(kron_logdet(
                star_logdet(between)?,
                q,
                star_logdet(within)?,
                m,
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixturePosterior<T> {
    /// Unnormalised; normalised on read.
    pub log_weights: Vec<T>,
    /// `components[k][r]`.
    pub components: Vec<Vec<GroupPosterior<T>>>,
}

impl<T: Real> MixturePosterior<T> {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn log_weights_normalized(&self) -> Vec<T> {
        let lse = log_sum_exp(&self.log_weights);
        self.log_weights.iter().map(|&w| w - lse).collect()
    }

    pub fn weights(&self) -> Vec<T> {
        self.log_weights_normalized()
            .iter()
            .map(|w| w.exp())
            .collect()
    }

    pub fn is_diagonal(&self) -> bool {
        self.components
            .iter()
            .flatten()
            .all(|g| matches!(g.cov, PosteriorCov::Diagonal(_)))
    }

    pub fn validate(&self, model: &GgpModel<T>) -> Result<()> {
        if self.components.is_empty() || self.log_weights.len() != self.components.len() {
            return Err(GgpError::InvalidModel(
                "mixture needs one weight per component".into(),
            ));
        }
        if self.n_components() > 1 && !self.is_diagonal() {
            return Err(GgpError::UnsupportedCombination(
                "mixtures need a diagonal covariance".into(),
            ));
        }
        for comp in &self.components {
            if comp.len() != model.groups.len() {
                return Err(GgpError::DimensionMismatch {
                    expected: model.groups.len(),
                    got: comp.len(),
                });
            }
            for (gp, post) in model.groups.iter().zip(comp) {
                let (q, m) = (gp.size(), gp.inducing_count());
                if post.mean.len() != q * m {
                    return Err(GgpError::DimensionMismatch {
                        expected: q * m,
                        got: post.mean.len(),
                    });
                }
                match &post.cov {
                    PosteriorCov::Diagonal(s) if s.len() != q * m => {
                        return Err(GgpError::DimensionMismatch {
                            expected: q * m,
                            got: s.len(),
                        })
                    }
                    PosteriorCov::Kronecker { between, within }
                        if between.dim() != q || within.dim() != m =>
                    {
                        return Err(GgpError::DimensionMismatch {
                            expected: q + m,
                            got: between.dim() + within.dim(),
                        })
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    pub fn write_params(&self, w: &mut ParamWriter) {
        for lw in &self.log_weights {
            w.raw(lw.value());
        }
        for g in self.components.iter().flatten() {
            for v in &g.mean {
                w.raw(v.value());
            }
            match &g.cov {
                PosteriorCov::Diagonal(s) => {
                    for v in s {
                        w.positive(v.value());
                    }
                }
                PosteriorCov::Kronecker { between, within } => {
                    write_star(w, &between.pivot_column, &between.off_diag);
                    write_star(w, &within.pivot_column, &within.off_diag);
                }
            }
        }
    }

    pub fn read_params<U: Real>(&self, r: &mut ParamReader<'_, U>) -> MixturePosterior<U> {
        let log_weights = r.raw_vec(self.log_weights.len());
        let components = self
            .components
            .iter()
            .map(|comp| {
                comp.iter()
                    .map(|g| {
                        let mean = r.raw_vec(g.mean.len());
                        let cov = match &g.cov {
                            PosteriorCov::Diagonal(s) => {
                                PosteriorCov::Diagonal(r.positive_vec(s.len()))
                            }
                            PosteriorCov::Kronecker { between, within } => {
                                let (bp, bd) = read_star(r, between.dim());
                                let (wp, wd) = read_star(r, within.dim());
                                PosteriorCov::Kronecker {
                                    between: SparseStarCholesky {
                                        pivot_column: bp,
                                        off_diag: bd,
                                    },
                                    within: SparseStarCholesky {
                                        pivot_column: wp,
                                        off_diag: wd,
                                    },
                                }
                            }
                        };
                        GroupPosterior { mean, cov }
                    })
                    .collect()
            })
            .collect();
        MixturePosterior {
            log_weights,
            components,
        }
    }
}

/// Settings for the starting posterior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PosteriorInit {
    pub kind: PosteriorKind,
    pub components: usize,
    pub variance: f64,
    /// Mean given to the pivot weight of each task row (identity mixing).
    pub pivot_weight_mean: f64,
    /// Standard deviation of the random jitter on all other means.
    pub mean_noise: f64,
}

impl Default for PosteriorInit {
    fn default() -> Self {
        PosteriorInit {
            kind: PosteriorKind::Kronecker,
            components: 1,
            variance: 0.1,
            pivot_weight_mean: 1.0,
            mean_noise: 0.01,
        }
    }
}

/// Starting posterior. Row groups whose pivot is a diagonal weight `W_ii`
/// start with that weight at `pivot_weight_mean`, so `y_i ≈ g_i` initially.
pub fn init_posterior(
    model: &GgpModel<f64>,
    init: &PosteriorInit,
    seed: u64,
) -> Result<MixturePosterior<f64>> {
    if init.components == 0 {
        return Err(GgpError::InvalidModel(
            "at least one mixture component".into(),
        ));
    }
    if init.components > 1 && init.kind == PosteriorKind::Kronecker {
        return Err(GgpError::UnsupportedCombination(
            "mixtures need a diagonal covariance".into(),
        ));
    }
    let s = &model.structure;
    let diag_weights: Vec<usize> = (0..s.tasks.min(s.nodes))
        .map(|i| s.weight_index(i, i))
        .collect();
    let mut rng = rng::stream(seed, &[tag::INIT, 1]);
    let components = (0..init.components)
        .map(|_| {
            model
                .groups
                .iter()
                .map(|gp| {
                    let (q, m) = (gp.size(), gp.inducing_count());
                    let mut mean: Vec<f64> = normals(&mut rng, q * m)
                        .into_iter()
                        .map(|z| z * init.mean_noise)
                        .collect();
                    for (j, member) in gp.members.iter().enumerate() {
                        if diag_weights.contains(member) {
                            for v in &mut mean[j * m..(j + 1) * m] {
                                *v += init.pivot_weight_mean;
                            }
                        }
                    }
                    let cov = match init.kind {
                        PosteriorKind::Diagonal => {
                            PosteriorCov::Diagonal(vec![init.variance; q * m])
                        }
                        PosteriorKind::Kronecker => PosteriorCov::Kronecker {
                            between: SparseStarCholesky::identity(q),
                            within: SparseStarCholesky::identity(m).scaled(init.variance.sqrt()),
                        },
                    };
                    GroupPosterior { mean, cov }
                })
                .collect()
        })
        .collect();
    Ok(MixturePosterior {
        log_weights: vec![0.0; init.components],
        components,
    })
}

/// The three ELBO components. `total` is their sum.
#[derive(Clone, Debug, PartialEq)]
pub struct ElboBreakdown<T> {
    pub entropy: T,
    pub cross_entropy: T,
    pub ell: T,
    pub total: T,
    /// Empty when `K > 1`, where the bound does not split by group.
    pub entropy_per_group: Vec<T>,
    pub cross_entropy_per_group: Vec<T>,
}

impl<T: Real> ElboBreakdown<T> {
    pub fn values(&self) -> ElboBreakdown<f64> {
        ElboBreakdown {
            entropy: self.entropy.value(),
            cross_entropy: self.cross_entropy.value(),
            ell: self.ell.value(),
            total: self.total.value(),
            entropy_per_group: self.entropy_per_group.iter().map(|v| v.value()).collect(),
            cross_entropy_per_group: self
                .cross_entropy_per_group
                .iter()
                .map(|v| v.value())
                .collect(),
        }
    }
}

/// Entropy term and its per-group split (`K = 1` only). With one component
/// this is the exact Gaussian entropy; with several, the mixture lower bound
/// `−Σ_k π_k ln Σ_l π_l N(m_k; m_l, S_k + S_l)`.
pub fn entropy_terms<T: Real>(
    post: &MixturePosterior<T>,
    model: &GgpModel<T>,
) -> Result<(T, Vec<T>)> {
    if post.n_components() == 1 {
        let per: Vec<T> = model
            .groups
            .iter()
            .zip(&post.components[0])
            .map(|(gp, g)| {
                let (q, m) = (gp.size(), gp.inducing_count());
                let ld = g.logdet(q, m)?;
                Ok((ld + (q * m) as f64 * (2.0 * PI * E).ln()) * 0.5)
            })
            .collect::<Result<_>>()?;
        return Ok((sum(per.iter().copied()), per));
    }
    if !post.is_diagonal() {
        return Err(GgpError::UnsupportedCombination(
            "mixture entropy needs a diagonal covariance".into(),
        ));
    }
    let k = post.n_components();
    let lw = post.log_weights_normalized();
    let mut total = T::zero();
    for a in 0..k {
        let mut terms = Vec::with_capacity(k);
        for b in 0..k {
            let mut ln_n = T::zero();
            for (ga, gb) in post.components[a].iter().zip(&post.components[b]) {
                let (PosteriorCov::Diagonal(sa), PosteriorCov::Diagonal(sb)) = (&ga.cov, &gb.cov)
                else {
                    unreachable!()
                };
                for i in 0..sa.len() {
                    let v = sa[i] + sb[i];
                    let d = ga.mean[i] - gb.mean[i];
                    ln_n -= ((v * (2.0 * PI)).ln() + d * d / v) * 0.5;
                }
            }
            terms.push(lw[b] + ln_n);
        }
        total -= lw[a].exp() * log_sum_exp(&terms);
    }
    Ok((total, Vec::new()))
}

pub fn entropy_bound<T: Real>(post: &MixturePosterior<T>, model: &GgpModel<T>) -> Result<T> {
    Ok(entropy_terms(post, model)?.0)
}

/// Cross-entropy `E_q[ln p(u)]` and its per-group split.
pub fn cross_entropy_terms<T: Real>(
    post: &MixturePosterior<T>,
    model: &GgpModel<T>,
    prepared: &[PreparedGroup<T>],
) -> Result<(T, Vec<T>)> {
    let weights = post.weights();
    let ln2pi = (2.0 * PI).ln();
    let mut per = Vec::with_capacity(model.groups.len());
    for (r, (gp, pg)) in model.groups.iter().zip(prepared).enumerate() {
        let (q, m) = (gp.size(), gp.inducing_count());
        let base = kron_logdet(pg.h_logdet, q, pg.zz_logdet, m) + (q * m) as f64 * ln2pi;
        let zz_inv_diag = pg.zz_chol.inverse_diagonal();
        let h_prec_diag = pg.h_prec.diagonal();
        let mut acc = T::zero();
        for (comp, &pi) in post.components.iter().zip(&weights) {
            let g = &comp[r];
            // m' (K_hh ⊗ K_zz)⁻¹ m through whitened blocks
            let u: Vec<Vec<T>> = (0..q)
                .map(|j| pg.zz_chol.forward_solve(g.mean_block(j, m)))
                .collect();
            let quad = pg.h_prec.contract(|a, b| dot(&u[a], &u[b]));
            let trace = match &g.cov {
                PosteriorCov::Diagonal(s) => {
                    let mut t = T::zero();
                    for j in 0..q {
                        t += h_prec_diag[j] * dot(&zz_inv_diag, &s[j * m..(j + 1) * m]);
                    }
                    t
                }
                PosteriorCov::Kronecker { between, within } => {
                    let tr_b = pg
                        .h_prec
                        .trace_with(&StarCovariance::from_cholesky(between));
                    let p = pg.zz_chol.forward_solve(&within.pivot_column);
                    let mut tr_w = dot(&p, &p);
                    for (i, &d) in within.off_diag.iter().enumerate() {
                        tr_w += d * d * zz_inv_diag[i + 1];
                    }
                    tr_b * tr_w
                }
            };
            acc += pi * (base + quad + trace);
        }
        per.push(acc * -0.5);
    }
    Ok((sum(per.iter().copied()), per))
}

pub fn cross_entropy<T: Real>(
    post: &MixturePosterior<T>,
    model: &GgpModel<T>,
    prepared: &[PreparedGroup<T>],
) -> Result<T> {
    Ok(cross_entropy_terms(post, model, prepared)?.0)
}

/// Second-moment part of a marginal that comes from the posterior.
#[derive(Clone, Debug, PartialEq)]
pub enum QuadPart<T> {
    /// `w = aᵀ S_w a`; the covariance contribution is `w · S_b`.
    Kronecker(T),
    /// Per-function variances `Σ_m a_m² S[j, m]`.
    Diagonal(Vec<T>),
}

/// Marginal `q(f_r(x))` for one component: mean and covariance
/// `k̃ · K_hh + quad`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupMarginal<T> {
    pub mean: Vec<T>,
    pub k_tilde: T,
    pub quad: QuadPart<T>,
}

pub fn marginal_posterior_at<T: Real>(
    post: &GroupPosterior<T>,
    cond: &ConditionalPrior<T>,
) -> Result<GroupMarginal<T>> {
    let m = cond.a_vec.len();
    if !post.mean.len().is_multiple_of(m) {
        return Err(GgpError::DimensionMismatch {
            expected: m,
            got: post.mean.len(),
        });
    }
    let q = post.mean.len() / m;
    let mean = (0..q)
        .map(|j| dot(&cond.a_vec, post.mean_block(j, m)))
        .collect();
    let quad = match &post.cov {
        PosteriorCov::Kronecker { within, .. } => {
            QuadPart::Kronecker(within.quadratic_form(&cond.a_vec)?)
        }
        PosteriorCov::Diagonal(s) => QuadPart::Diagonal(
            (0..q)
                .map(|j| {
                    let mut acc = T::zero();
                    for (a, v) in cond.a_vec.iter().zip(&s[j * m..(j + 1) * m]) {
                        acc += *a * *a * *v;
                    }
                    acc
                })
                .collect(),
        ),
    };
    Ok(GroupMarginal {
        mean,
        k_tilde: cond.k_tilde,
        quad,
    })
}

fn checked_sqrt<T: Real>(x: T) -> Result<T> {
    let v = x.value();
    if v < -NEGATIVE_TOL {
        return Err(GgpError::NegativeScalar(v));
    }
    // sqrt has an unbounded derivative at zero
    Ok(if v > f64::MIN_POSITIVE {
        x.sqrt()
    } else {
        T::zero()
    })
}

/// One draw from `N(mean, k̃ K_hh + quad)` given standard normals `z1`, `z2`
/// of length `Q_r`. Written into `out`.
pub fn indirect_sample_with<T: Real>(
    marg: &GroupMarginal<T>,
    h_chol: &SparseStarCholesky<T>,
    cov: &PosteriorCov<T>,
    z1: &[f64],
    z2: &[f64],
    out: &mut [T],
) -> Result<()> {
    let q = marg.mean.len();
    if z1.len() != q || z2.len() != q || out.len() != q || h_chol.dim() != q {
        return Err(GgpError::DimensionMismatch {
            expected: q,
            got: z1.len().max(z2.len()).max(out.len()).max(h_chol.dim()),
        });
    }
    let sk = checked_sqrt(marg.k_tilde)?;
    let z1s: Vec<T> = lift(z1);
    let e1 = h_chol.matvec_unchecked(&z1s);
    match (&marg.quad, cov) {
        (QuadPart::Kronecker(w), PosteriorCov::Kronecker { between, .. }) => {
            let sw = checked_sqrt(*w)?;
            let e2 = between.matvec_unchecked(&lift::<T>(z2));
            for j in 0..q {
                out[j] = marg.mean[j] + sk * e1[j] + sw * e2[j];
            }
        }
        (QuadPart::Diagonal(d), _) => {
            for j in 0..q {
                out[j] = marg.mean[j] + sk * e1[j] + checked_sqrt(d[j])? * z2[j];
            }
        }
        _ => {
            return Err(GgpError::UnsupportedCombination(
                "marginal and covariance variants differ".into(),
            ))
        }
    }
    Ok(())
}

/// `count` draws, each of length `Q_r`.
pub fn indirect_sample<T: Real, R: Rng>(
    marg: &GroupMarginal<T>,
    h_chol: &SparseStarCholesky<T>,
    cov: &PosteriorCov<T>,
    rng: &mut R,
    count: usize,
) -> Result<Vec<Vec<T>>> {
    let q = marg.mean.len();
    let mut z = vec![0.0; 2 * q];
    (0..count)
        .map(|_| {
            for v in z.iter_mut() {
                *v = rng.sample(rand_distr::StandardNormal);
            }
            let mut out = vec![T::zero(); q];
            indirect_sample_with(marg, h_chol, cov, &z[..q], &z[q..], &mut out)?;
            Ok(out)
        })
        .collect()
}

/// Key of the random streams used by one ELL evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EllKey {
    pub seed: u64,
    pub epoch: u64,
    pub batch: u64,
}

/// Training inputs and normalised targets.
#[derive(Clone, Copy, Debug)]
pub struct DataView<'a> {
    pub x: &'a Mat<f64>,
    pub y: &'a Mat<f64>,
}

/// Mixture component for every `(point, draw)`, row-major.
fn draw_components(weights: &[f64], n: usize, s: usize, key: EllKey) -> Vec<usize> {
    if weights.len() == 1 {
        return vec![0; n * s];
    }
    let mut rng = rng::stream(key.seed, &[tag::MIXTURE, key.epoch, key.batch]);
    (0..n * s)
        .map(|_| {
            let mut u: f64 = rng.gen();
            for (k, &w) in weights.iter().enumerate() {
                if u < w {
                    return k;
                }
                u -= w;
            }
            weights.len() - 1
        })
        .collect()
}

/// Per-group latent samples at each batch point: `out[r][(n·S + s)·Q_r + j]`.
/// Group `r` always consumes `2·Q_r` normals per draw from its own stream.
pub fn sample_latents<T: Real>(
    post: &MixturePosterior<T>,
    model: &GgpModel<T>,
    prepared: &[PreparedGroup<T>],
    x: &Mat<f64>,
    rows: &[usize],
    samples: usize,
    key: EllKey,
) -> Result<Vec<Vec<T>>> {
    let w: Vec<f64> = post.weights().iter().map(|v| v.value()).collect();
    let comps = draw_components(&w, rows.len(), samples, key);
    let k = post.n_components();
    let mut out = Vec::with_capacity(model.groups.len());
    for (r, (gp, pg)) in model.groups.iter().zip(prepared).enumerate() {
        let q = gp.size();
        let mut rng = rng::stream(key.seed, &[tag::ELL, key.epoch, key.batch, r as u64]);
        let mut buf = vec![T::zero(); rows.len() * samples * q];
        for (ni, &row) in rows.iter().enumerate() {
            let xr: Vec<T> = lift(x.row(row));
            let cond = pg.conditional_prior_at(gp, &xr)?;
            let mut margs: Vec<Option<GroupMarginal<T>>> = vec![None; k];
            for s in 0..samples {
                let z = normals(&mut rng, 2 * q);
                let c = comps[ni * samples + s];
                if margs[c].is_none() {
                    margs[c] = Some(marginal_posterior_at(&post.components[c][r], &cond)?);
                }
                let at = (ni * samples + s) * q;
                indirect_sample_with(
                    margs[c].as_ref().unwrap(),
                    &pg.h_chol,
                    &post.components[c][r].cov,
                    &z[..q],
                    &z[q..],
                    &mut buf[at..at + q],
                )?;
            }
        }
        out.push(buf);
    }
    Ok(out)
}

/// Monte Carlo expected log-likelihood over `rows`, scaled to `n_total`.
pub fn ell_minibatch<T: Real>(
    post: &MixturePosterior<T>,
    model: &GgpModel<T>,
    prepared: &[PreparedGroup<T>],
    data: DataView<'_>,
    rows: &[usize],
    n_total: usize,
    samples: usize,
    key: EllKey,
) -> Result<T> {
    if rows.is_empty() || samples == 0 {
        return Ok(T::zero());
    }
    let st = model.structure;
    if data.y.cols() != st.tasks {
        return Err(GgpError::DimensionMismatch {
            expected: st.tasks,
            got: data.y.cols(),
        });
    }
    let latents = sample_latents(post, model, prepared, data.x, rows, samples, key)?;
    let loc = model.latent_locations();
    let sizes: Vec<usize> = model.groups.iter().map(|g| g.size()).collect();
    let inv_var: Vec<T> = model.noise_var.iter().map(|v| v.recip()).collect();
    let log_norm = sum(model.noise_var.iter().map(|v| (*v * (2.0 * PI)).ln())) * -0.5;
    let mut f = vec![T::zero(); st.q_total()];
    let mut yhat = vec![T::zero(); st.tasks];
    let mut total = T::zero();
    for (ni, &row) in rows.iter().enumerate() {
        let y = data.y.row(row);
        for s in 0..samples {
            for (fi, &(r, j)) in f.iter_mut().zip(&loc) {
                *fi = latents[r][(ni * samples + s) * sizes[r] + j];
            }
            st.combine(&f, &mut yhat);
            let mut sq = T::zero();
            for i in 0..st.tasks {
                let d = yhat[i] - y[i];
                sq += d * d * inv_var[i];
            }
            total += log_norm - sq * 0.5;
        }
    }
    Ok(total * (n_total as f64 / (rows.len() * samples) as f64))
}

/// Prior, posterior and noise: everything the optimiser updates.
#[derive(Clone, Debug, PartialEq)]
pub struct GgpState<T> {
    pub model: GgpModel<T>,
    pub posterior: MixturePosterior<T>,
}

impl<T: Real> GgpState<T> {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.posterior.validate(&self.model)
    }

    /// Unconstrained parameter vector.
    pub fn to_params(&self) -> Vec<f64> {
        let mut w = ParamWriter::new();
        self.model.write_params(&mut w);
        self.posterior.write_params(&mut w);
        w.finish()
    }

    /// Same structure with parameters taken from `theta`.
    pub fn with_params<U: Real>(&self, theta: &[U]) -> Result<GgpState<U>> {
        let expected = self.param_count();
        if theta.len() != expected {
            return Err(GgpError::DimensionMismatch {
                expected,
                got: theta.len(),
            });
        }
        let mut r = ParamReader::new(theta);
        let model = self.model.read_params(&mut r);
        let posterior = self.posterior.read_params(&mut r);
        debug_assert!(r.is_exhausted());
        Ok(GgpState { model, posterior })
    }

    pub fn param_count(&self) -> usize {
        self.to_params().len()
    }

    pub fn values(&self) -> GgpState<f64> {
        self.with_params(&self.to_params())
            .expect("round trip of own parameters")
    }

    /// ELBO with the ELL estimated on `rows`.
    pub fn elbo(
        &self,
        data: DataView<'_>,
        rows: &[usize],
        samples: usize,
        key: EllKey,
    ) -> Result<ElboBreakdown<T>> {
        let prepared = self.model.prepare()?;
        let (entropy, entropy_per_group) = entropy_terms(&self.posterior, &self.model)?;
        let (cross, cross_per_group) =
            cross_entropy_terms(&self.posterior, &self.model, &prepared)?;
        let ell = ell_minibatch(
            &self.posterior,
            &self.model,
            &prepared,
            data,
            rows,
            data.x.rows(),
            samples,
            key,
        )?;
        Ok(ElboBreakdown {
            entropy,
            cross_entropy: cross,
            ell,
            total: entropy + cross + ell,
            entropy_per_group,
            cross_entropy_per_group: cross_per_group,
        })
    }
}
