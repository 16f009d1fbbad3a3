//! Versioned TOML checkpoints.
//!
//! A checkpoint holds the config echo, the group layout (enough to rebuild
//! every struct without data), the flat unconstrained parameter vector, the
//! Adam state and the random-stream position `(seed, epoch)`. Numeric arrays
//! are written as decimal strings with 17 significant digits, so a save/load
//! cycle is bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::data::{write_atomic, NormState};
use crate::dense::Mat;
use crate::error::{GgpError, Result};
use crate::kernels::{FeatureMatrix, KernelSpec};
use crate::model::{
    CrossCovariance, FreeCholParams, GgpModel, GprnStructure, GroupPrior, SparsityMode,
};
use crate::star::SparseStarCholesky;
use crate::trainer::Adam;
use crate::variational::{GgpState, GroupPosterior, MixturePosterior, PosteriorCov, PosteriorKind};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HCovLayout {
    Kernel { kernel: KernelSpec },
    Free { dim: usize },
    Unit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupLayout {
    pub members: Vec<usize>,
    pub mode: SparsityMode,
    pub h_features: Vec<Vec<f64>>,
    pub x_kernel: KernelSpec,
    pub h_cov: HCovLayout,
    pub inducing_rows: usize,
    pub inducing_cols: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub structure: GprnStructure,
    pub posterior_kind: PosteriorKind,
    pub components: usize,
    pub groups: Vec<GroupLayout>,
}

impl Layout {
    pub fn of(state: &GgpState<f64>) -> Self {
        let kind = match state.posterior.components[0][0].cov {
            PosteriorCov::Diagonal(_) => PosteriorKind::Diagonal,
            PosteriorCov::Kronecker { .. } => PosteriorKind::Kronecker,
        };
        Layout {
            structure: state.model.structure,
            posterior_kind: kind,
            components: state.posterior.n_components(),
            groups: state
                .model
                .groups
                .iter()
                .map(|g| GroupLayout {
                    members: g.members.clone(),
                    mode: g.mode,
                    h_features: (0..g.h_features.rows())
                        .map(|i| g.h_features.row(i).to_vec())
                        .collect(),
                    x_kernel: g.x_kernel.clone(),
                    h_cov: match &g.h_cov {
                        CrossCovariance::Kernel(k) => HCovLayout::Kernel { kernel: k.clone() },
                        CrossCovariance::Free(f) => HCovLayout::Free {
                            dim: f.pivot_column.len(),
                        },
                        CrossCovariance::Unit => HCovLayout::Unit,
                    },
                    inducing_rows: g.inducing.rows(),
                    inducing_cols: g.inducing.cols(),
                })
                .collect(),
        }
    }

    /// A state with this layout and placeholder values.
    pub fn skeleton(&self) -> Result<GgpState<f64>> {
        let groups = self
            .groups
            .iter()
            .enumerate()
            .map(|(r, g)| {
                Ok(GroupPrior {
                    group_id: r,
                    members: g.members.clone(),
                    mode: g.mode,
                    h_features: FeatureMatrix::from_rows(&g.h_features)?,
                    x_kernel: g.x_kernel.clone(),
                    h_cov: match &g.h_cov {
                        HCovLayout::Kernel { kernel } => CrossCovariance::Kernel(kernel.clone()),
                        HCovLayout::Free { dim } => {
                            CrossCovariance::Free(FreeCholParams::initial(*dim))
                        }
                        HCovLayout::Unit => CrossCovariance::Unit,
                    },
                    inducing: Mat::zeros(g.inducing_rows, g.inducing_cols),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let model = GgpModel {
            structure: self.structure,
            noise_var: vec![1.0; self.structure.tasks],
            groups,
        };
        let components = (0..self.components)
            .map(|_| {
                model
                    .groups
                    .iter()
                    .map(|g| {
                        let (q, m) = (g.size(), g.inducing_count());
                        GroupPosterior {
                            mean: vec![0.0; q * m],
                            cov: match self.posterior_kind {
                                PosteriorKind::Diagonal => PosteriorCov::Diagonal(vec![1.0; q * m]),
                                PosteriorKind::Kronecker => PosteriorCov::Kronecker {
                                    between: SparseStarCholesky::identity(q),
                                    within: SparseStarCholesky::identity(m),
                                },
                            },
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(GgpState {
            model,
            posterior: MixturePosterior {
                log_weights: vec![0.0; self.components],
                components,
            },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamRecord {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub t: u64,
    pub m: Vec<String>,
    pub v: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    /// Completed epochs; the next epoch's streams are keyed by `epoch + 1`.
    pub epoch: usize,
    pub seed: u64,
    pub site_ids: Vec<String>,
    pub elbo_trace: Vec<String>,
    pub params: Vec<String>,
    pub config: RunConfig,
    pub norm: Option<NormState>,
    pub adam: Option<AdamRecord>,
    pub layout: Layout,
}

pub fn encode(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| format!("{x:.16e}")).collect()
}

pub fn decode(v: &[String]) -> Result<Vec<f64>> {
    v.iter()
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| GgpError::Checkpoint(format!("bad number {s:?}")))
        })
        .collect()
}

impl Checkpoint {
    pub fn new(
        state: &GgpState<f64>,
        config: &RunConfig,
        norm: Option<&NormState>,
        site_ids: &[String],
        adam: Option<&Adam>,
        epoch: usize,
        elbo_trace: &[f64],
    ) -> Self {
        Checkpoint {
            format_version: FORMAT_VERSION,
            epoch,
            seed: config.train.seed,
            site_ids: site_ids.to_vec(),
            elbo_trace: encode(elbo_trace),
            params: encode(&state.to_params()),
            config: config.clone(),
            norm: norm.cloned(),
            adam: adam.map(|a| AdamRecord {
                lr: a.lr,
                beta1: a.beta1,
                beta2: a.beta2,
                epsilon: a.epsilon,
                t: a.t,
                m: encode(&a.m),
                v: encode(&a.v),
            }),
            layout: Layout::of(state),
        }
    }

    pub fn state(&self) -> Result<GgpState<f64>> {
        let theta = decode(&self.params)?;
        let state = self.layout.skeleton()?.with_params(&theta)?;
        state.validate()?;
        Ok(state)
    }

    pub fn adam(&self) -> Result<Option<Adam>> {
        self.adam
            .as_ref()
            .map(|a| {
                Ok(Adam {
                    lr: a.lr,
                    beta1: a.beta1,
                    beta2: a.beta2,
                    epsilon: a.epsilon,
                    t: a.t,
                    m: decode(&a.m)?,
                    v: decode(&a.v)?,
                })
            })
            .transpose()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| GgpError::Checkpoint(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Checkpoint =
            toml::from_str(text).map_err(|e| GgpError::Checkpoint(e.to_string()))?;
        if c.format_version != FORMAT_VERSION {
            return Err(GgpError::Checkpoint(format!(
                "unsupported format version {}",
                c.format_version
            )));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_toml()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_encoding_is_exact() {
        let xs = [0.1, -1.0 / 3.0, 1e-300, f64::MAX, 123456.789e10];
        assert_eq!(decode(&encode(&xs)).unwrap(), xs);
    }
}
