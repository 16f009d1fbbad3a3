//! Monte Carlo predictive distribution and evaluation metrics.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;

use crate::dense::Mat;
use crate::error::{GgpError, Result};
use crate::model::PreparedGroup;
use crate::rng::{self, normals, tag};
use crate::variational::{indirect_sample_with, marginal_posterior_at, GgpState, GroupMarginal};

/// Reference values reported for the sparse explicit Kronecker model on the
/// 25-site dataset. Documentation only; the data are not available.
pub mod reference {
    pub const RMSE: f64 = 0.341;
    pub const MAE: f64 = 0.214;
    pub const NLPD: f64 = 0.374;
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictiveSummary {
    /// `N_test × P`.
    pub mean: Mat<f64>,
    /// Sample variance plus observation noise, `N_test × P`.
    pub variance: Mat<f64>,
    /// Per point, an `S × P` matrix of draws of `W g` (noise-free).
    pub samples: Option<Vec<Mat<f64>>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictOptions {
    pub samples: usize,
    pub seed: u64,
    pub keep_samples: bool,
}

impl PredictOptions {
    pub fn new(samples: usize, seed: u64) -> Self {
        PredictOptions {
            samples,
            seed,
            keep_samples: false,
        }
    }
}

pub fn predict(
    state: &GgpState<f64>,
    x: &Mat<f64>,
    opts: PredictOptions,
) -> Result<PredictiveSummary> {
    if opts.samples < 2 {
        return Err(GgpError::InvalidModel(
            "prediction needs at least two samples".into(),
        ));
    }
    if x.cols() != state.model.input_dim() {
        return Err(GgpError::DimensionMismatch {
            expected: state.model.input_dim(),
            got: x.cols(),
        });
    }
    let prepared = state.model.prepare()?;
    let p = state.model.structure.tasks;
    let per_point: Vec<Mat<f64>> = (0..x.rows())
        .into_par_iter()
        .map(|n| draw_outputs(state, &prepared, x.row(n), n as u64, opts))
        .collect::<Result<_>>()?;
    let mut mean = Mat::zeros(x.rows(), p);
    let mut variance = Mat::zeros(x.rows(), p);
    let s = opts.samples as f64;
    for (n, draws) in per_point.iter().enumerate() {
        for i in 0..p {
            let mu = (0..opts.samples).map(|k| draws.get(k, i)).sum::<f64>() / s;
            let ss = (0..opts.samples)
                .map(|k| (draws.get(k, i) - mu).powi(2))
                .sum::<f64>();
            mean.set(n, i, mu);
            variance.set(n, i, ss / (s - 1.0) + state.model.noise_var[i]);
        }
    }
    Ok(PredictiveSummary {
        mean,
        variance,
        samples: opts.keep_samples.then_some(per_point),
    })
}

/// `S × P` draws of `W g` at one input; the stream depends only on
/// `(seed, point)`.
fn draw_outputs(
    state: &GgpState<f64>,
    prepared: &[PreparedGroup<f64>],
    x: &[f64],
    point: u64,
    opts: PredictOptions,
) -> Result<Mat<f64>> {
    let model = &state.model;
    let post = &state.posterior;
    let st = model.structure;
    let k = post.n_components();
    let weights = post.weights();
    let conds = model
        .groups
        .iter()
        .zip(prepared)
        .map(|(gp, pg)| pg.conditional_prior_at(gp, x))
        .collect::<Result<Vec<_>>>()?;
    let mut margs: Vec<Vec<Option<GroupMarginal<f64>>>> = vec![vec![None; model.groups.len()]; k];
    let mut rng = rng::stream(opts.seed, &[tag::PREDICT, point]);
    let mut f = vec![0.0; st.q_total()];
    let mut buf = Vec::new();
    let mut out = Mat::zeros(opts.samples, st.tasks);
    let mut y = vec![0.0; st.tasks];
    for s in 0..opts.samples {
        let c = if k == 1 { 0 } else { pick(&weights, rng.gen()) };
        for (r, gp) in model.groups.iter().enumerate() {
            let q = gp.size();
            let z = normals(&mut rng, 2 * q);
            if margs[c][r].is_none() {
                margs[c][r] = Some(marginal_posterior_at(&post.components[c][r], &conds[r])?);
            }
            buf.resize(q, 0.0);
            indirect_sample_with(
                margs[c][r].as_ref().unwrap(),
                &prepared[r].h_chol,
                &post.components[c][r].cov,
                &z[..q],
                &z[q..],
                &mut buf,
            )?;
            for (j, &m) in gp.members.iter().enumerate() {
                f[m] = buf[j];
            }
        }
        st.combine(&f, &mut y);
        for (i, v) in y.iter().enumerate() {
            out.set(s, i, *v);
        }
    }
    Ok(out)
}

fn pick(weights: &[f64], mut u: f64) -> usize {
    for (k, &w) in weights.iter().enumerate() {
        if u < w {
            return k;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Affine map from the normalised to the raw target scale, per task.
#[derive(Clone, Debug, PartialEq)]
pub struct Denormalizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Denormalizer {
    pub fn identity(p: usize) -> Self {
        Denormalizer {
            mean: vec![0.0; p],
            scale: vec![1.0; p],
        }
    }

    pub fn value(&self, task: usize, z: f64) -> f64 {
        z * self.scale[task] + self.mean[task]
    }

    pub fn variance(&self, task: usize, v: f64) -> f64 {
        v * self.scale[task] * self.scale[task]
    }

    /// Predictive summary on the raw scale.
    pub fn apply(&self, pred: &PredictiveSummary) -> PredictiveSummary {
        let (n, p) = (pred.mean.rows(), pred.mean.cols());
        PredictiveSummary {
            mean: Mat::from_fn(n, p, |r, i| self.value(i, pred.mean.get(r, i))),
            variance: Mat::from_fn(n, p, |r, i| self.variance(i, pred.variance.get(r, i))),
            samples: pred.samples.as_ref().map(|all| {
                all.iter()
                    .map(|m| Mat::from_fn(m.rows(), p, |s, i| self.value(i, m.get(s, i))))
                    .collect()
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub rmse: f64,
    pub mae: f64,
    pub nlpd: f64,
    pub fvar: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub per_task: Vec<Metrics>,
    pub pooled: Metrics,
}

impl MetricReport {
    /// `scope,rmse,mae,nlpd,fvar` with one row per task and a `pooled` row.
    pub fn to_csv(&self, site_ids: &[String]) -> String {
        let mut s = String::from("scope,rmse,mae,nlpd,fvar\n");
        let row = |name: &str, m: &Metrics| {
            format!(
                "{name},{:e},{:e},{:e},{:e}\n",
                m.rmse, m.mae, m.nlpd, m.fvar
            )
        };
        for (i, m) in self.per_task.iter().enumerate() {
            let name = site_ids
                .get(i)
                .cloned()
                .unwrap_or_else(|| format!("task_{}", i + 1));
            s.push_str(&row(&name, m));
        }
        s.push_str(&row("pooled", &self.pooled));
        s
    }
}

/// Losses of Gaussian predictions `N(mean, variance)` against `y`, all
/// `N × P` on the same scale. NLPD uses the moment-matched Gaussian.
pub fn score(mean: &Mat<f64>, variance: &Mat<f64>, y: &Mat<f64>) -> Result<MetricReport> {
    let (n, p) = (y.rows(), y.cols());
    for m in [mean, variance] {
        if m.rows() != n || m.cols() != p {
            return Err(GgpError::ShapeMismatch(format!(
                "predictions are {}×{}, targets {n}×{p}",
                m.rows(),
                m.cols()
            )));
        }
    }
    if n == 0 {
        return Err(GgpError::ShapeMismatch("no test points".into()));
    }
    let ln2pi = (2.0 * PI).ln();
    let mut acc = vec![[0.0f64; 4]; p];
    for r in 0..n {
        for (i, a) in acc.iter_mut().enumerate() {
            let e = mean.get(r, i) - y.get(r, i);
            let v = variance.get(r, i);
            if !(v > 0.0) {
                return Err(GgpError::ShapeMismatch(format!(
                    "non-positive predictive variance at row {r}"
                )));
            }
            a[0] += e * e;
            a[1] += e.abs();
            a[2] += 0.5 * (ln2pi + v.ln() + e * e / v);
            a[3] += v;
        }
    }
    let finish = |a: [f64; 4], count: f64| Metrics {
        rmse: (a[0] / count).sqrt(),
        mae: a[1] / count,
        nlpd: a[2] / count,
        fvar: a[3] / count,
    };
    let per_task = acc.iter().map(|a| finish(*a, n as f64)).collect();
    let mut tot = [0.0; 4];
    for a in &acc {
        for k in 0..4 {
            tot[k] += a[k];
        }
    }
    Ok(MetricReport {
        per_task,
        pooled: finish(tot, (n * p) as f64),
    })
}

/// Metrics on the raw scale: predictions are denormalised, `y_raw` is not.
pub fn metrics(
    pred: &PredictiveSummary,
    y_raw: &Mat<f64>,
    denorm: &Denormalizer,
) -> Result<MetricReport> {
    let raw = denorm.apply(pred);
    score(&raw.mean, &raw.variance, y_raw)
}

/// Per-task training mean with the training variance as predictive variance.
pub fn mean_baseline(y_train: &Mat<f64>, n_test: usize) -> (Mat<f64>, Mat<f64>) {
    let (n, p) = (y_train.rows(), y_train.cols());
    let mu: Vec<f64> = (0..p)
        .map(|i| (0..n).map(|r| y_train.get(r, i)).sum::<f64>() / n as f64)
        .collect();
    let var: Vec<f64> = (0..p)
        .map(|i| {
            let ss: f64 = (0..n).map(|r| (y_train.get(r, i) - mu[i]).powi(2)).sum();
            (ss / n as f64).max(f64::MIN_POSITIVE)
        })
        .collect();
    (
        Mat::from_fn(n_test, p, |_, i| mu[i]),
        Mat::from_fn(n_test, p, |_, i| var[i]),
    )
}

/// Persistence: the most recent observed value (`last`, `N × P`), with the
/// variance of persistence residuals on training data.
pub fn persistence_baseline(
    last_train: &Mat<f64>,
    y_train: &Mat<f64>,
    last_test: &Mat<f64>,
) -> (Mat<f64>, Mat<f64>) {
    let (n, p) = (y_train.rows(), y_train.cols());
    let var: Vec<f64> = (0..p)
        .map(|i| {
            let ss: f64 = (0..n)
                .map(|r| (y_train.get(r, i) - last_train.get(r, i)).powi(2))
                .sum();
            (ss / n as f64).max(f64::MIN_POSITIVE)
        })
        .collect();
    (
        last_test.clone(),
        Mat::from_fn(last_test.rows(), p, |_, i| var[i]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn perfect_predictions() {
        let y = Mat::from_fn(4, 2, |r, i| (r + i) as f64);
        let v = Mat::from_fn(4, 2, |_, _| 1.0);
        let rep = score(&y, &v, &y).unwrap();
        assert_eq!(rep.pooled.rmse, 0.0);
        assert_eq!(rep.pooled.mae, 0.0);
        assert_relative_eq!(rep.pooled.nlpd, 0.5 * (2.0 * PI).ln(), epsilon = 1e-12);
        assert_eq!(rep.pooled.fvar, 1.0);
    }

    #[test]
    fn constant_predictor_rmse_is_std() {
        let y = Mat::from_vec(4, 1, vec![1.0, 2.0, 3.0, 6.0]).unwrap();
        let (m, v) = mean_baseline(&y, 4);
        let rep = score(&m, &v, &y).unwrap();
        let mu = 3.0;
        let sd = ((4.0 + 1.0 + 0.0 + 9.0) / 4.0f64).sqrt();
        assert_eq!(m.get(0, 0), mu);
        assert_relative_eq!(rep.pooled.rmse, sd, epsilon = 1e-12);
    }

    #[test]
    fn inflated_variance_raises_nlpd() {
        let y = Mat::from_vec(3, 1, vec![0.1, -0.2, 0.05]).unwrap();
        let m = Mat::zeros(3, 1);
        let v = Mat::from_fn(3, 1, |_, _| 0.02);
        let wide = v.map(|x| x * 100.0);
        assert!(score(&m, &wide, &y).unwrap().pooled.nlpd > score(&m, &v, &y).unwrap().pooled.nlpd);
    }

    #[test]
    fn shape_mismatch() {
        let y = Mat::zeros(3, 2);
        let m = Mat::zeros(2, 2);
        assert!(matches!(score(&m, &m, &y), Err(GgpError::ShapeMismatch(_))));
    }

    #[test]
    fn denormalisation_round_trip() {
        let d = Denormalizer {
            mean: vec![10.0],
            scale: vec![2.0],
        };
        let y_raw = Mat::from_vec(3, 1, vec![9.0, 11.5, 14.0]).unwrap();
        let z = y_raw.map(|v| (v - 10.0) / 2.0);
        let pred = PredictiveSummary {
            mean: z.map(|v| v + 0.1),
            variance: Mat::from_fn(3, 1, |_, _| 0.25),
            samples: None,
        };
        let raw = metrics(&pred, &y_raw, &d).unwrap();
        let direct = score(
            &y_raw.map(|v| v + 0.2),
            &Mat::from_fn(3, 1, |_, _| 1.0),
            &y_raw,
        )
        .unwrap();
        assert_relative_eq!(raw.pooled.rmse, direct.pooled.rmse, epsilon = 1e-10);
        assert_relative_eq!(raw.pooled.nlpd, direct.pooled.nlpd, epsilon = 1e-10);
    }
}
