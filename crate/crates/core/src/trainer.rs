//! Stochastic optimisation of the ELBO with Adam.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autodiff::{gradient, Var};
use crate::dense::Mat;
use crate::error::{GgpError, Result};
use crate::forecast::{predict, PredictOptions};
use crate::rng::{self, tag};
use crate::variational::{DataView, EllKey, GgpState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Seconds; checked between epochs.
    pub max_wall_time: f64,
    pub rel_tol: f64,
    pub mc_samples_train: usize,
    pub mc_samples_eval: usize,
    pub seed: u64,
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.005,
            beta1: 0.9,
            beta2: 0.99,
            epsilon: 1e-8,
            batch_size: 200,
            max_epochs: 200,
            max_wall_time: 20.0 * 3600.0,
            rel_tol: 1e-5,
            mc_samples_train: 20,
            mc_samples_eval: 200,
            seed: 0,
            checkpoint_every: 5,
        }
    }
}

impl TrainConfig {
    /// Named presets. `low-momentum` uses `β₁ = 0.09`.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "default" => Some(Self::default()),
            "low-momentum" => Some(TrainConfig {
                beta1: 0.09,
                ..Self::default()
            }),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !(self.learning_rate > 0.0)
            || !unit(self.beta1)
            || !unit(self.beta2)
            || !(self.epsilon > 0.0)
            || !(self.max_wall_time > 0.0)
            || !unit(self.rel_tol)
            || self.batch_size == 0
            || self.mc_samples_train == 0
            || self.mc_samples_eval < 2
            || self.checkpoint_every == 0
        {
            return Err(GgpError::Config(format!(
                "invalid training settings: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Adam on a minimisation objective.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl Adam {
    pub fn new(n: usize, cfg: &TrainConfig) -> Self {
        Adam {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..theta.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / b1t;
            let vh = self.v[i] / b2t;
            theta[i] -= self.lr * mh / (vh.sqrt() + self.epsilon);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxEpochs,
    WallTime,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub elbo: f64,
    pub mean_step_secs: f64,
    pub elbo_secs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub initial_elbo: f64,
    pub epochs: Vec<EpochRecord>,
    pub stop_reason: StopReason,
    pub final_learning_rate: f64,
    /// Epochs at which a checkpoint was emitted.
    pub checkpoints: Vec<usize>,
}

impl TrainReport {
    pub fn elbo_trace(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.elbo).collect()
    }

    pub fn final_elbo(&self) -> f64 {
        self.epochs.last().map_or(self.initial_elbo, |e| e.elbo)
    }

    /// `epoch,elbo,mean_step_secs,elbo_secs`; epoch 0 is the initial state.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,elbo,mean_step_secs,elbo_secs\n");
        s.push_str(&format!("0,{:.17e},0,0\n", self.initial_elbo));
        for e in &self.epochs {
            s.push_str(&format!(
                "{},{:.17e},{:e},{:e}\n",
                e.epoch, e.elbo, e.mean_step_secs, e.elbo_secs
            ));
        }
        s
    }
}

/// Optimiser snapshot handed to the checkpoint hook.
pub struct TrainSnapshot<'a> {
    pub state: &'a GgpState<f64>,
    pub adam: &'a Adam,
    pub epoch: usize,
    pub elbo_trace: &'a [f64],
}

pub type CheckpointHook<'a> = dyn FnMut(&TrainSnapshot<'_>) -> Result<()> + 'a;

/// Key of the fixed stream used for the per-epoch full-data ELBO.
pub fn epoch_elbo_key(seed: u64) -> EllKey {
    EllKey {
        seed,
        epoch: tag::FULL_ELBO,
        batch: u64::MAX,
    }
}

/// Full-data ELBO with a fixed random stream, in `f64`.
pub fn full_elbo(
    state: &GgpState<f64>,
    data: DataView<'_>,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let rows: Vec<usize> = (0..data.x.rows()).collect();
    Ok(state
        .elbo(data, &rows, samples, epoch_elbo_key(seed))?
        .total)
}

/// Value and gradient of the minibatch ELBO at `theta`.
pub fn elbo_and_gradient(
    state: &GgpState<f64>,
    theta: &[f64],
    data: DataView<'_>,
    rows: &[usize],
    samples: usize,
    key: EllKey,
) -> Result<(f64, Vec<f64>)> {
    let mut err = None;
    let (v, g) = gradient(theta, |th: &[Var]| {
        match state
            .with_params(th)
            .and_then(|s| s.elbo(data, rows, samples, key))
        {
            Ok(b) => b.total,
            Err(e) => {
                err = Some(e);
                <Var as crate::scalar::Real>::cst(f64::NAN)
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok((v, g)),
    }
}

/// Uniformly shuffled minibatches for one epoch.
pub fn epoch_batches(n: usize, batch_size: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, &[tag::SHUFFLE, epoch]));
    idx.chunks(batch_size.max(1)).map(|c| c.to_vec()).collect()
}

/// Optimises `state` in place; returns the training report.
pub fn fit(
    state: &mut GgpState<f64>,
    data: DataView<'_>,
    cfg: &TrainConfig,
    hook: Option<&mut CheckpointHook<'_>>,
) -> Result<TrainReport> {
    fit_from(state, data, cfg, None, 0, hook)
}

/// As [`fit`], continuing from an optimiser state and epoch count.
pub fn fit_from(
    state: &mut GgpState<f64>,
    data: DataView<'_>,
    cfg: &TrainConfig,
    adam: Option<Adam>,
    start_epoch: usize,
    mut hook: Option<&mut CheckpointHook<'_>>,
) -> Result<TrainReport> {
    cfg.validate()?;
    state.validate()?;
    if data.x.rows() != data.y.rows() {
        return Err(GgpError::DimensionMismatch {
            expected: data.x.rows(),
            got: data.y.rows(),
        });
    }
    if data.x.cols() != state.model.input_dim() || data.y.cols() != state.model.structure.tasks {
        return Err(GgpError::DimensionMismatch {
            expected: state.model.input_dim() + state.model.structure.tasks,
            got: data.x.cols() + data.y.cols(),
        });
    }
    if data.x.rows() == 0 {
        return Err(GgpError::EmptyAfterFilter);
    }
    let started = Instant::now();
    let cap = Duration::from_secs_f64(cfg.max_wall_time);
    let mut theta = state.to_params();
    let mut adam = adam.unwrap_or_else(|| Adam::new(theta.len(), cfg));
    let initial_elbo = full_elbo(state, data, cfg.mc_samples_train, cfg.seed)?;
    if !initial_elbo.is_finite() {
        return Err(GgpError::NonFiniteElbo { epoch: start_epoch });
    }
    let mut epochs: Vec<EpochRecord> = Vec::new();
    let mut trace: Vec<f64> = Vec::new();
    let mut checkpoints = Vec::new();
    let mut halved = false;
    let mut prev = initial_elbo;
    let mut stop_reason = StopReason::MaxEpochs;
    let mut epoch = start_epoch;
    while epoch < cfg.max_epochs {
        if started.elapsed() >= cap {
            stop_reason = StopReason::WallTime;
            break;
        }
        let e = epoch as u64 + 1;
        let good_theta = theta.clone();
        let good_adam = adam.clone();
        let batches = epoch_batches(data.x.rows(), cfg.batch_size, cfg.seed, e);
        let mut step_time = Duration::ZERO;
        let mut failed = false;
        for (b, rows) in batches.iter().enumerate() {
            let key = EllKey {
                seed: cfg.seed,
                epoch: e,
                batch: b as u64,
            };
            let t0 = Instant::now();
            let (val, grad) =
                match elbo_and_gradient(state, &theta, data, rows, cfg.mc_samples_train, key) {
                    Ok(r) => r,
                    Err(GgpError::NonPositivePivot(_))
                    | Err(GgpError::SingularInducingGram { .. })
                    | Err(GgpError::NegativeSchur { .. })
                    | Err(GgpError::DegenerateFactor(_)) => (f64::NAN, Vec::new()),
                    Err(err) => return Err(err),
                };
            if !val.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                failed = true;
                break;
            }
            let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
            adam.step(&mut theta, &neg);
            step_time += t0.elapsed();
        }
        let t1 = Instant::now();
        let elbo = if failed {
            f64::NAN
        } else {
            let s = state.with_params(&theta)?;
            full_elbo(&s, data, cfg.mc_samples_train, cfg.seed).unwrap_or(f64::NAN)
        };
        let elbo_secs = t1.elapsed().as_secs_f64();
        if !elbo.is_finite() {
            theta = good_theta;
            adam = good_adam;
            if halved {
                *state = state.with_params(&theta)?;
                if let Some(h) = hook.as_deref_mut() {
                    h(&TrainSnapshot {
                        state,
                        adam: &adam,
                        epoch,
                        elbo_trace: &trace,
                    })?;
                }
                return Err(GgpError::NonFiniteElbo { epoch: epoch + 1 });
            }
            log::warn!(
                "non-finite ELBO in epoch {}; halving the learning rate",
                epoch + 1
            );
            halved = true;
            adam.lr *= 0.5;
            continue;
        }
        *state = state.with_params(&theta)?;
        // Continue from the state's own parameters so a resumed run matches.
        theta = state.to_params();
        epoch += 1;
        trace.push(elbo);
        epochs.push(EpochRecord {
            epoch,
            elbo,
            mean_step_secs: step_time.as_secs_f64() / batches.len() as f64,
            elbo_secs,
        });
        log::info!("epoch {epoch}: elbo {elbo:.6}");
        if epoch.is_multiple_of(cfg.checkpoint_every) {
            if let Some(h) = hook.as_deref_mut() {
                h(&TrainSnapshot {
                    state,
                    adam: &adam,
                    epoch,
                    elbo_trace: &trace,
                })?;
                checkpoints.push(epoch);
            }
        }
        let rel = (elbo - prev).abs() / elbo.abs().max(f64::MIN_POSITIVE);
        prev = elbo;
        if rel < cfg.rel_tol {
            stop_reason = StopReason::Converged;
            break;
        }
    }
    if let Some(h) = hook {
        if checkpoints.last() != Some(&epoch) {
            h(&TrainSnapshot {
                state,
                adam: &adam,
                epoch,
                elbo_trace: &trace,
            })?;
            checkpoints.push(epoch);
        }
    }
    Ok(TrainReport {
        initial_elbo,
        epochs,
        stop_reason,
        final_learning_rate: adam.lr,
        checkpoints,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub repetitions: usize,
    pub mean_step_secs: f64,
    pub full_elbo_secs: f64,
    pub predict_secs: f64,
    pub params: usize,
    pub test_points: usize,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        format!(
            "metric,value\nrepetitions,{}\nparams,{}\ntest_points,{}\nmean_step_secs,{:e}\nfull_elbo_secs,{:e}\npredict_secs,{:e}\n",
            self.repetitions,
            self.params,
            self.test_points,
            self.mean_step_secs,
            self.full_elbo_secs,
            self.predict_secs
        )
    }
}

/// Mean gradient-step, full-ELBO and full-test prediction times after one
/// warm-up round. Parameters are not updated.
pub fn benchmark(
    state: &GgpState<f64>,
    data: DataView<'_>,
    x_test: &Mat<f64>,
    cfg: &TrainConfig,
    repetitions: usize,
) -> Result<BenchReport> {
    cfg.validate()?;
    let reps = repetitions.max(1);
    let theta = state.to_params();
    let rows: Vec<usize> = epoch_batches(data.x.rows(), cfg.batch_size, cfg.seed, 1)
        .into_iter()
        .next()
        .unwrap_or_default();
    let opts = PredictOptions::new(cfg.mc_samples_eval, cfg.seed);
    let mut times = [0.0f64; 3];
    for rep in 0..=reps {
        let key = EllKey {
            seed: cfg.seed,
            epoch: 1,
            batch: 0,
        };
        let t0 = Instant::now();
        elbo_and_gradient(state, &theta, data, &rows, cfg.mc_samples_train, key)?;
        let t1 = Instant::now();
        full_elbo(state, data, cfg.mc_samples_train, cfg.seed)?;
        let t2 = Instant::now();
        predict(state, x_test, opts)?;
        let t3 = Instant::now();
        if rep > 0 {
            times[0] += (t1 - t0).as_secs_f64();
            times[1] += (t2 - t1).as_secs_f64();
            times[2] += (t3 - t2).as_secs_f64();
        }
    }
    let r = reps as f64;
    Ok(BenchReport {
        repetitions: reps,
        mean_step_secs: times[0] / r,
        full_elbo_secs: times[1] / r,
        predict_secs: times[2] / r,
        params: theta.len(),
        test_points: x_test.rows(),
    })
}
