//! Synthetic multi-site data drawn from a grouped GP regression network.
//!
//! Nodes `g_j(t)` are independent GPs on time with a quasi-periodic daily
//! component plus a short-range component. Row `i` of the weights is a GP with
//! covariance `K_hh ⊗ k_w(t)` around a spatial-decay mean
//! `μ_ij = exp(−|s_i − s_j|² / 2ℓ²)`; without the mean, distinct sites would be
//! uncorrelated. Outputs are `y = W g + ε`.

use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};

use crate::data::{write_atomic, write_sites, RawSeries, TIMESTAMP_FORMAT};
use crate::dense::{DenseCholesky, Mat};
use crate::error::{GgpError, Result};
use crate::kernels::KernelSpec;
use crate::rng::{self, normals, tag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthPreset {
    /// RBF cross-site covariance with spatially decaying mixing.
    RbfH,
    /// Unit nodes and fixed mixing; outputs are constant up to noise.
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub sites: usize,
    pub rows: usize,
    pub seed: u64,
    pub preset: SynthPreset,
    pub cadence_minutes: u32,
    /// First and last local time of each simulated day.
    pub day_first: String,
    pub day_last: String,
    pub start_date: String,
    pub periodic_variance: f64,
    pub periodic_lengthscale: f64,
    /// Days over which the daily shape drifts.
    pub drift_days: f64,
    pub short_variance: f64,
    pub short_lengthscale_hours: f64,
    pub weight_variance: f64,
    pub weight_lengthscale_days: f64,
    /// In units of site spacing.
    pub spatial_lengthscale: f64,
    pub noise_std: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sites: 4,
            rows: 2000,
            seed: 0,
            preset: SynthPreset::RbfH,
            cadence_minutes: 5,
            day_first: "06:30".into(),
            day_last: "19:00".into(),
            start_date: "2021-03-01".into(),
            periodic_variance: 1.0,
            periodic_lengthscale: 0.7,
            drift_days: 30.0,
            short_variance: 0.3,
            short_lengthscale_hours: 2.0,
            weight_variance: 0.05,
            weight_lengthscale_days: 3.0,
            spatial_lengthscale: 1.0,
            noise_std: 0.4,
        }
    }
}

/// Cross-site correlations of the generated outputs, averaged by distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthCheck {
    pub distances: Vec<f64>,
    pub mean_correlation: Vec<f64>,
    pub monotone_decreasing: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthOutput {
    pub raw: RawSeries,
    pub coords: Vec<Vec<f64>>,
    /// `N × P`.
    pub nodes: Mat<f64>,
    /// `N × P²`, column `i·P + j` is `W_ij`.
    pub weights: Mat<f64>,
    pub check: SynthCheck,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthFiles {
    pub data: PathBuf,
    pub sites: PathBuf,
    pub truth: PathBuf,
    pub params: PathBuf,
}

fn time_grid(cfg: &SynthConfig) -> Result<Vec<NaiveDateTime>> {
    let bad = |what: &str| GgpError::Config(format!("synth: bad {what}"));
    let first = NaiveTime::parse_from_str(&cfg.day_first, "%H:%M").map_err(|_| bad("day_first"))?;
    let last = NaiveTime::parse_from_str(&cfg.day_last, "%H:%M").map_err(|_| bad("day_last"))?;
    let mut day =
        NaiveDate::parse_from_str(&cfg.start_date, "%Y-%m-%d").map_err(|_| bad("start_date"))?;
    if cfg.cadence_minutes == 0 || last < first {
        return Err(bad("day window"));
    }
    let step = Duration::minutes(cfg.cadence_minutes as i64);
    let mut out = Vec::with_capacity(cfg.rows);
    let mut t = day.and_time(first);
    while out.len() < cfg.rows {
        if t.time() > last || t.date() != day {
            day = day.succ_opt().ok_or_else(|| bad("start_date"))?;
            t = day.and_time(first);
        }
        out.push(t);
        t += step;
    }
    Ok(out)
}

fn days(t: NaiveDateTime) -> f64 {
    t.and_utc().timestamp() as f64 / 86_400.0
}

/// Draws `count` independent GP paths on `times` (rows of the result are
/// time points).
fn gp_paths(
    kernel: &KernelSpec,
    times: &[f64],
    count: usize,
    stream: u64,
    seed: u64,
) -> Result<Mat<f64>> {
    let n = times.len();
    let k = Mat::from_fn(n, n, |a, b| {
        kernel
            .eval(&[times[a]], &[times[b]])
            .expect("scalar kernel")
    });
    let scale = (0..n)
        .map(|i| k.get(i, i))
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let l = DenseCholesky::new(&k, 1e-6 * scale)?;
    let mut out = Mat::zeros(n, count);
    for c in 0..count {
        let z = normals(&mut rng::stream(seed, &[tag::SYNTH, stream, c as u64]), n);
        for i in 0..n {
            let mut s = 0.0;
            for (j, zj) in z.iter().enumerate().take(i + 1) {
                s += l.get(i, j) * zj;
            }
            out.set(i, c, s);
        }
    }
    Ok(out)
}

pub fn synth_generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    let p = cfg.sites;
    if p == 0 || cfg.rows < 2 {
        return Err(GgpError::Config(
            "synth needs at least one site and two rows".into(),
        ));
    }
    let times = time_grid(cfg)?;
    let t: Vec<f64> = times.iter().map(|&x| days(x)).collect();
    let n = t.len();
    let coords: Vec<Vec<f64>> = (0..p).map(|i| vec![i as f64, 0.0]).collect();
    let dist2 = |i: usize, j: usize| -> f64 {
        coords[i]
            .iter()
            .zip(&coords[j])
            .map(|(a, b)| (a - b).powi(2))
            .sum()
    };
    let mu = |i: usize, j: usize| (-dist2(i, j) / (2.0 * cfg.spatial_lengthscale.powi(2))).exp();

    let (nodes, weights) = match cfg.preset {
        SynthPreset::Constant => (
            Mat::from_fn(n, p, |_, _| 1.0),
            Mat::from_fn(n, p * p, |_, c| mu(c / p, c % p)),
        ),
        SynthPreset::RbfH => {
            let node_kernel = KernelSpec::Sum {
                terms: vec![
                    KernelSpec::Product {
                        factors: vec![
                            KernelSpec::Periodic {
                                period: 1.0,
                                lengthscale: cfg.periodic_lengthscale,
                                variance: cfg.periodic_variance,
                            },
                            KernelSpec::Rbf {
                                lengthscales: vec![cfg.drift_days],
                                variance: 1.0,
                            },
                        ],
                    },
                    KernelSpec::Rbf {
                        lengthscales: vec![cfg.short_lengthscale_hours / 24.0],
                        variance: cfg.short_variance,
                    },
                ],
            };
            let nodes = gp_paths(&node_kernel, &t, p, 0, cfg.seed)?;
            let wk = KernelSpec::Rbf {
                lengthscales: vec![cfg.weight_lengthscale_days],
                variance: cfg.weight_variance,
            };
            let omega = gp_paths(&wk, &t, p * p, 1, cfg.seed)?;
            // mix each row across nodes with the factor of K_hh
            let khh = Mat::from_fn(p, p, |a, b| {
                (-dist2(a, b) / (2.0 * cfg.spatial_lengthscale.powi(2))).exp()
            });
            let lh = DenseCholesky::new(&khh, 1e-6)?;
            let mut w = Mat::zeros(n, p * p);
            for r in 0..n {
                for i in 0..p {
                    for j in 0..p {
                        let mut s = mu(i, j);
                        for k in 0..=j {
                            s += lh.get(j, k) * omega.get(r, i * p + k);
                        }
                        w.set(r, i * p + j, s);
                    }
                }
            }
            (nodes, w)
        }
    };

    let eps = normals(&mut rng::stream(cfg.seed, &[tag::SYNTH, 2]), n * p);
    let values = Mat::from_fn(n, p, |r, i| {
        let mut y = 0.0;
        for j in 0..p {
            y += weights.get(r, i * p + j) * nodes.get(r, j);
        }
        y + cfg.noise_std * eps[r * p + i]
    });
    let check = correlation_check(&values, &coords);
    Ok(SynthOutput {
        raw: RawSeries {
            timestamps: times,
            site_ids: (1..=p).map(|i| format!("site_{i}")).collect(),
            values,
        },
        coords,
        nodes,
        weights,
        check,
    })
}

/// Mean pairwise correlation of the columns of `y`, grouped by site distance.
pub fn correlation_check(y: &Mat<f64>, coords: &[Vec<f64>]) -> SynthCheck {
    let (n, p) = (y.rows(), y.cols());
    let mut mean = vec![0.0; p];
    let mut sd = vec![0.0; p];
    for i in 0..p {
        mean[i] = (0..n).map(|r| y.get(r, i)).sum::<f64>() / n as f64;
        sd[i] = ((0..n).map(|r| (y.get(r, i) - mean[i]).powi(2)).sum::<f64>() / n as f64).sqrt();
    }
    let mut by_dist: Vec<(f64, f64, usize)> = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            let d = coords[i]
                .iter()
                .zip(&coords[j])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let c = (0..n)
                .map(|r| (y.get(r, i) - mean[i]) * (y.get(r, j) - mean[j]))
                .sum::<f64>()
                / (n as f64 * sd[i] * sd[j]).max(f64::MIN_POSITIVE);
            match by_dist.iter_mut().find(|e| (e.0 - d).abs() < 1e-9) {
                Some(e) => {
                    e.1 += c;
                    e.2 += 1;
                }
                None => by_dist.push((d, c, 1)),
            }
        }
    }
    by_dist.sort_by(|a, b| a.0.total_cmp(&b.0));
    let distances: Vec<f64> = by_dist.iter().map(|e| e.0).collect();
    let mean_correlation: Vec<f64> = by_dist.iter().map(|e| e.1 / e.2 as f64).collect();
    let monotone_decreasing = mean_correlation.windows(2).all(|w| w[1] < w[0]);
    SynthCheck {
        distances,
        mean_correlation,
        monotone_decreasing,
    }
}

#[derive(Serialize)]
struct TruthParams<'a> {
    config: &'a SynthConfig,
    check: &'a SynthCheck,
}

/// Writes `<stem>.csv`, `<stem>.sites.csv`, `<stem>.truth.csv` (latent
/// values) and `<stem>.truth.toml` (generator settings and self-check).
pub fn write_synth(out: &SynthOutput, cfg: &SynthConfig, stem: &Path) -> Result<SynthFiles> {
    let with = |suffix: &str| {
        let mut s = stem.as_os_str().to_os_string();
        s.push(suffix);
        PathBuf::from(s)
    };
    let files = SynthFiles {
        data: with(".csv"),
        sites: with(".sites.csv"),
        truth: with(".truth.csv"),
        params: with(".truth.toml"),
    };
    crate::data::write_raw(&out.raw, &files.data)?;
    write_sites(&files.sites, &out.raw.site_ids, &out.coords)?;
    let p = out.raw.site_ids.len();
    let mut s = String::from("timestamp");
    for j in 0..p {
        s.push_str(&format!(",g_{}", j + 1));
    }
    for i in 0..p {
        for j in 0..p {
            s.push_str(&format!(",w_{}_{}", i + 1, j + 1));
        }
    }
    s.push('\n');
    for (r, t) in out.raw.timestamps.iter().enumerate() {
        s.push_str(&t.format(TIMESTAMP_FORMAT).to_string());
        for v in out.nodes.row(r).iter().chain(out.weights.row(r)) {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    write_atomic(&files.truth, s.as_bytes())?;
    let params = toml::to_string(&TruthParams {
        config: cfg,
        check: &out.check,
    })
    .map_err(|e| GgpError::Config(e.to_string()))?;
    write_atomic(&files.params, params.as_bytes())?;
    Ok(files)
}
