//! Run configuration (TOML) and the multi-site model layout.
//!
//! ```toml
//! output_dir = "out"
//!
//! [data]
//! path = "power.csv"
//! sites = "sites.csv"      # optional `site,c1,c2` coordinates
//! test_fraction = 0.2
//!
//! [features]
//! horizon = 3
//! lags = 2
//! day_start = "07:00"
//! day_end = "19:00"
//! tz_offset_minutes = 0
//!
//! [model]
//! sparsity_mode = "implicit" # implicit | explicit | free
//! inducing = 15
//!
//! [model.posterior]
//! kind = "kronecker"         # kronecker | diagonal
//! components = 1
//!
//! [train]
//! preset = "default"         # or "low-momentum"; other keys override it
//! max_epochs = 200
//! seed = 0
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{DataConfig, Dataset};
use crate::dense::Mat;
use crate::error::{GgpError, Result};
use crate::kernels::{FeatureMatrix, KernelSpec};
use crate::model::{
    default_h_covariance, init_inducing, standardized_inducing_count, CrossCovariance, GgpModel,
    GprnStructure, GroupPrior, HKernelSettings, SparsityMode,
};
use crate::rng::{self, tag};
use crate::trainer::TrainConfig;
use crate::variational::{init_posterior, GgpState, PosteriorInit};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub path: Option<PathBuf>,
    pub sites: Option<PathBuf>,
    pub test_fraction: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            path: None,
            sites: None,
            test_fraction: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub sparsity_mode: SparsityMode,
    /// Inducing points per group.
    pub inducing: usize,
    /// Rescale `inducing` so that `R · M³` matches one group of `inducing`.
    pub standardize_inducing: bool,
    pub posterior: PosteriorInit,
    pub h_kernel: HKernelSettings,
    /// Period of the time kernel, in days. Fixed.
    pub period: f64,
    pub time_lengthscale: f64,
    pub lag_lengthscale: f64,
    pub kernel_variance: f64,
    pub noise_variance: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            sparsity_mode: SparsityMode::Implicit,
            inducing: 15,
            standardize_inducing: false,
            posterior: PosteriorInit::default(),
            h_kernel: HKernelSettings::default(),
            period: 1.0,
            time_lengthscale: 1.0,
            lag_lengthscale: 1.0,
            kernel_variance: 1.0,
            noise_variance: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub data: DataSection,
    pub features: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            output_dir: PathBuf::from("out"),
            data: DataSection::default(),
            features: DataConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses TOML. A `preset` key in `[train]` selects the base settings
    /// that the remaining keys override.
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut value: toml::Table =
            toml::from_str(text).map_err(|e| GgpError::Config(e.to_string()))?;
        if let Some(toml::Value::Table(train)) = value.get_mut("train") {
            if let Some(p) = train.remove("preset") {
                let name = p
                    .as_str()
                    .ok_or_else(|| GgpError::Config("train.preset must be a string".into()))?;
                let base = TrainConfig::preset(name)
                    .ok_or_else(|| GgpError::Config(format!("unknown preset {name:?}")))?;
                let mut merged =
                    toml::Table::try_from(&base).map_err(|e| GgpError::Config(e.to_string()))?;
                for (k, v) in train.iter() {
                    merged.insert(k.clone(), v.clone());
                }
                *train = merged;
            }
        }
        let cfg: RunConfig = value
            .try_into()
            .map_err(|e: toml::de::Error| GgpError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GgpError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.output_dir);
        if let Some(p) = cfg.data.path.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.data.sites.as_mut() {
            resolve(p);
        }
        for p in cfg.data.path.iter().chain(&cfg.data.sites) {
            if !p.exists() {
                return Err(GgpError::Config(format!("{} does not exist", p.display())));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        self.train.validate()?;
        let m = &self.model;
        if m.inducing == 0 {
            return Err(GgpError::Config("model.inducing must be positive".into()));
        }
        for (name, v) in [
            ("period", m.period),
            ("time_lengthscale", m.time_lengthscale),
            ("lag_lengthscale", m.lag_lengthscale),
            ("kernel_variance", m.kernel_variance),
            ("noise_variance", m.noise_variance),
            ("h_kernel.variance", m.h_kernel.variance),
            ("h_kernel.delta_variance", m.h_kernel.delta_variance),
            ("h_kernel.dilation", m.h_kernel.dilation),
            ("h_kernel.lengthscale", m.h_kernel.lengthscale),
            ("h_kernel.bandwidth", m.h_kernel.bandwidth),
            ("posterior.variance", m.posterior.variance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(GgpError::Config(format!("model.{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Coordinates centred and scaled so the largest absolute entry is 1.
pub fn normalize_sites(coords: &[Vec<f64>]) -> Result<FeatureMatrix> {
    let d = coords.first().map_or(1, |c| c.len()).max(1);
    let n = coords.len().max(1) as f64;
    let mut mean = vec![0.0; d];
    for c in coords {
        for k in 0..d {
            mean[k] += c[k] / n;
        }
    }
    let mut span: f64 = 0.0;
    for c in coords {
        for k in 0..d {
            span = span.max((c[k] - mean[k]).abs());
        }
    }
    let span = if span > 0.0 { span } else { 1.0 };
    let rows: Vec<Vec<f64>> = coords
        .iter()
        .map(|c| (0..d).map(|k| (c[k] - mean[k]) / span).collect())
        .collect();
    FeatureMatrix::from_rows(&rows)
}

/// Sites evenly spaced on a line, used when no coordinates are supplied.
pub fn default_sites(p: usize) -> Vec<Vec<f64>> {
    (0..p).map(|i| vec![i as f64]).collect()
}

/// Multi-site layout: `Q_g = P` nodes; row `i` of `W` is one group with pivot
/// `W_ii`; each node is a singleton group. Weights use a daily periodic kernel
/// on time times an RBF on the lags of their own site; node `j` uses an RBF
/// on the lags of site `j`.
pub fn build_state(
    cfg: &ModelConfig,
    data: &Dataset,
    site_coords: &[Vec<f64>],
    seed: u64,
) -> Result<GgpState<f64>> {
    let p = data.tasks();
    if site_coords.len() != p {
        return Err(GgpError::DimensionMismatch {
            expected: p,
            got: site_coords.len(),
        });
    }
    let sites = normalize_sites(site_coords)?;
    let st = GprnStructure { tasks: p, nodes: p };
    let n_groups = 2 * p;
    let m = if cfg.standardize_inducing {
        standardized_inducing_count(cfg.inducing, 1, n_groups)
    } else {
        cfg.inducing
    };
    let lag_rbf = |site: usize| KernelSpec::Columns {
        columns: data.lag_columns(site),
        kernel: Box::new(KernelSpec::Rbf {
            lengthscales: vec![cfg.lag_lengthscale; data.lags],
            variance: cfg.kernel_variance,
        }),
    };
    let mut groups = Vec::with_capacity(n_groups);
    for i in 0..p {
        let members = st.row_group(i)?;
        let nodes: Vec<usize> = members.iter().map(|&w| w - i * p).collect();
        let rows: Vec<Vec<f64>> = nodes.iter().map(|&j| sites.row(j).to_vec()).collect();
        let x_kernel = KernelSpec::Product {
            factors: vec![
                KernelSpec::Columns {
                    columns: vec![0],
                    kernel: Box::new(KernelSpec::Periodic {
                        period: cfg.period,
                        lengthscale: cfg.time_lengthscale,
                        variance: 1.0,
                    }),
                },
                lag_rbf(i),
            ],
        };
        groups.push(GroupPrior {
            group_id: groups.len(),
            members,
            mode: cfg.sparsity_mode,
            h_features: FeatureMatrix::from_rows(&rows)?,
            x_kernel,
            h_cov: default_h_covariance(cfg.sparsity_mode, p, sites.dims(), &cfg.h_kernel),
            inducing: Mat::zeros(0, 0),
        });
    }
    for j in 0..p {
        groups.push(GroupPrior {
            group_id: groups.len(),
            members: vec![st.node_index(j)],
            mode: cfg.sparsity_mode,
            h_features: FeatureMatrix::from_rows(&[sites.row(j).to_vec()])?,
            x_kernel: lag_rbf(j),
            h_cov: CrossCovariance::Unit,
            inducing: Mat::zeros(0, 0),
        });
    }
    for (r, g) in groups.iter_mut().enumerate() {
        let mut rng = rng::stream(seed, &[tag::INIT, 0, r as u64]);
        g.inducing = init_inducing(&g.x_kernel, &data.x, m, &mut rng)?;
    }
    let model = GgpModel {
        structure: st,
        groups,
        noise_var: vec![cfg.noise_variance; p],
    };
    model.validate()?;
    let posterior = init_posterior(&model, &cfg.posterior, seed)?;
    let state = GgpState { model, posterior };
    state.validate()?;
    Ok(state)
}
