//! Command-line surface. Results go to files; messages go to standard error.
//!
//! Exit status: 0 on success, 1 on a usage error, 2 on a runtime error.

use std::collections::HashMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use clap::{Args, Parser, Subcommand};

use crate::checkpoint::{decode, Checkpoint};
use crate::config::{build_state, default_sites, RunConfig};
use crate::data::{
    ingest_csv, parse_timestamp, read_raw, read_sites, write_atomic, Dataset, TIMESTAMP_FORMAT,
};
use crate::dense::Mat;
use crate::error::{GgpError, Result};
use crate::forecast::{predict, score, PredictOptions};
use crate::kernels::verify_implicit_sparsity;
use crate::model::CrossCovariance;
use crate::synth::{synth_generate, write_synth, SynthConfig, SynthPreset};
use crate::trainer::{benchmark, fit_from, TrainSnapshot};
use crate::variational::{DataView, GgpState};

/// Environment variable that fixes the size of the worker pool.
pub const THREADS_ENV: &str = "SPARSE_GGP_THREADS";

pub const CHECKPOINT_FILE: &str = "checkpoint.toml";
pub const TRAIN_REPORT_FILE: &str = "train_report.csv";

#[derive(Debug, Parser)]
#[command(
    name = "sparse-ggp",
    version,
    about = "Sparse grouped GP regression networks for multi-site forecasting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model; writes a checkpoint and a per-epoch ELBO report.
    Train(TrainArgs),
    /// Predictive mean and variance for every usable row of a data file.
    Predict(PredictArgs),
    /// Losses of a predictions file against observed values.
    Eval(EvalArgs),
    /// Time gradient steps, full ELBO evaluation and prediction.
    Bench(BenchArgs),
    /// Sample a synthetic multi-site data set.
    Synth(SynthArgs),
    /// Check the implicit-sparsity identity of every group's cross-site kernel.
    VerifyKernel(VerifyArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "predictions.csv")]
    output: PathBuf,
    /// Monte Carlo draws per point; defaults to the training config.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Predict only the final fraction of rows.
    #[arg(long)]
    last_fraction: Option<f64>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    predictions: PathBuf,
    /// Wide `timestamp,site_1,…` data or a long predictions-style file.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value = "metrics.csv")]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    /// Defaults to `bench.csv` in the configured output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    repetitions: usize,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output stem; writes `<stem>.csv`, `<stem>.sites.csv` and truth sidecars.
    #[arg(long)]
    output: PathBuf,
    /// TOML generator settings; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    sites: Option<usize>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `rbf_h` or `constant`.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    noise_std: Option<f64>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    config: PathBuf,
    /// Defaults to `verify_kernel.csv` in the configured output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            eprint!("{}", e.render());
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

/// Sizes the global worker pool from [`THREADS_ENV`], if set.
pub fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        GgpError::Config(format!(
            "{THREADS_ENV} must be a positive integer, got {v:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| GgpError::Config(e.to_string()))
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Train(a) => train(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
        Command::Synth(a) => synth(a),
        Command::VerifyKernel(a) => verify(a),
    }
}

struct Prepared {
    cfg: RunConfig,
    data: Dataset,
    train: Dataset,
    test: Dataset,
    coords: Vec<Vec<f64>>,
}

fn prepare(config: &Path) -> Result<Prepared> {
    let cfg = RunConfig::load(config)?;
    let path = cfg
        .data
        .path
        .clone()
        .ok_or_else(|| GgpError::Config("data.path is required".into()))?;
    let data = ingest_csv(&path, &cfg.features, None)?;
    let r = data.report;
    log::info!(
        "{}: {} rows read, {} dropped (missing), {} outside window, {} without lags, {} usable",
        path.display(),
        r.rows_read,
        r.dropped_missing,
        r.outside_window,
        r.missing_lags,
        r.usable
    );
    let coords = match &cfg.data.sites {
        Some(p) => read_sites(p, &data.site_ids)?,
        None => default_sites(data.tasks()),
    };
    let (train, test) = data.split(cfg.data.test_fraction)?;
    Ok(Prepared {
        cfg,
        data,
        train,
        test,
        coords,
    })
}

fn train(a: TrainArgs) -> Result<()> {
    let Prepared {
        mut cfg,
        data,
        train,
        coords,
        ..
    } = prepare(&a.config)?;
    if let Some(dir) = a.output_dir {
        cfg.output_dir = dir;
    }
    std::fs::create_dir_all(&cfg.output_dir)?;
    let (mut state, adam, start, prior_trace) = match &a.resume {
        Some(p) => {
            let ck = Checkpoint::load(p)?;
            if ck.site_ids != data.site_ids {
                return Err(GgpError::Checkpoint(
                    "checkpoint sites differ from the data file".into(),
                ));
            }
            (ck.state()?, ck.adam()?, ck.epoch, decode(&ck.elbo_trace)?)
        }
        None => (
            build_state(&cfg.model, &train, &coords, cfg.train.seed)?,
            None,
            0,
            Vec::new(),
        ),
    };
    let ck_path = cfg.output_dir.join(CHECKPOINT_FILE);
    let mut hook = |snap: &TrainSnapshot<'_>| -> Result<()> {
        let mut trace = prior_trace.clone();
        trace.extend_from_slice(snap.elbo_trace);
        Checkpoint::new(
            snap.state,
            &cfg,
            Some(&data.norm),
            &data.site_ids,
            Some(snap.adam),
            snap.epoch,
            &trace,
        )
        .save(&ck_path)
    };
    let view = DataView {
        x: &train.x,
        y: &train.y,
    };
    let report = fit_from(&mut state, view, &cfg.train, adam, start, Some(&mut hook))?;
    let report_path = cfg.output_dir.join(TRAIN_REPORT_FILE);
    write_atomic(&report_path, report.to_csv().as_bytes())?;
    log::info!(
        "elbo {:.6} -> {:.6} ({:?}); wrote {} and {}",
        report.initial_elbo,
        report.final_elbo(),
        report.stop_reason,
        ck_path.display(),
        report_path.display()
    );
    Ok(())
}

fn predict_cmd(a: PredictArgs) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let cfg = &ck.config;
    let state = ck.state()?;
    let mut data = ingest_csv(&a.data, &cfg.features, ck.norm.as_ref())?;
    if data.site_ids != ck.site_ids {
        return Err(GgpError::SchemaError {
            path: a.data.clone(),
            reason: format!(
                "sites {:?} differ from the checkpoint's {:?}",
                data.site_ids, ck.site_ids
            ),
        });
    }
    if let Some(f) = a.last_fraction {
        if !(f > 0.0 && f <= 1.0) {
            return Err(GgpError::Config(format!(
                "last fraction {f} outside (0, 1]"
            )));
        }
        let n = data.len();
        let keep = ((n as f64) * f).round().max(1.0) as usize;
        data = data.rows(n - keep.min(n)..n);
    }
    let opts = PredictOptions::new(
        a.samples.unwrap_or(cfg.train.mc_samples_eval),
        a.seed.unwrap_or(cfg.train.seed),
    );
    let raw = data.denormalizer().apply(&predict(&state, &data.x, opts)?);
    let mut s = String::from("timestamp,site,mean,variance\n");
    for (r, t) in data.timestamps.iter().enumerate() {
        let t = t.format(TIMESTAMP_FORMAT);
        for (i, site) in data.site_ids.iter().enumerate() {
            s.push_str(&format!(
                "{t},{site},{:.17e},{:.17e}\n",
                raw.mean.get(r, i),
                raw.variance.get(r, i)
            ));
        }
    }
    write_atomic(&a.output, s.as_bytes())?;
    log::info!(
        "wrote {} predictions to {}",
        data.len() * data.tasks(),
        a.output.display()
    );
    Ok(())
}

/// Long-format predictions: `(timestamp, site) -> (mean, variance)`.
struct LongTable {
    sites: Vec<String>,
    times: Vec<NaiveDateTime>,
    cells: HashMap<(NaiveDateTime, String), (f64, f64)>,
}

fn read_long(path: &Path, value_cols: &[&str]) -> Result<LongTable> {
    let schema = |reason: String| GgpError::SchemaError {
        path: path.to_path_buf(),
        reason,
    };
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (ti, si) = match (col("timestamp"), col("site")) {
        (Some(t), Some(s)) => (t, s),
        _ => return Err(schema("expected `timestamp` and `site` columns".into())),
    };
    let vi = value_cols
        .iter()
        .find_map(|c| col(c))
        .ok_or_else(|| schema(format!("expected one of {value_cols:?}")))?;
    let var_i = col("variance");
    let mut out = LongTable {
        sites: Vec::new(),
        times: Vec::new(),
        cells: HashMap::new(),
    };
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let t = parse_timestamp(field(ti))
            .ok_or_else(|| schema(format!("bad timestamp on line {}", line + 2)))?;
        let site = field(si).to_string();
        let num = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|_| schema(format!("bad number on line {}", line + 2)))
        };
        let v = num(vi)?;
        let var = match var_i {
            Some(i) => num(i)?,
            None => f64::NAN,
        };
        if !out.sites.contains(&site) {
            out.sites.push(site.clone());
        }
        if out.times.last() != Some(&t) {
            out.times.push(t);
        }
        out.cells.insert((t, site), (v, var));
    }
    out.times.sort();
    out.times.dedup();
    Ok(out)
}

fn eval(a: EvalArgs) -> Result<()> {
    let pred = read_long(&a.predictions, &["mean"])?;
    let is_long = {
        let mut rdr = csv::Reader::from_path(&a.truth)?;
        let h = rdr.headers()?;
        h.iter().any(|c| c.trim() == "site")
    };
    let truth: HashMap<(NaiveDateTime, String), f64> = if is_long {
        read_long(&a.truth, &["value", "mean"])?
            .cells
            .into_iter()
            .map(|(k, (v, _))| (k, v))
            .collect()
    } else {
        let (raw, _, _) = read_raw(&a.truth)?;
        let mut m = HashMap::new();
        for (r, t) in raw.timestamps.iter().enumerate() {
            for (i, s) in raw.site_ids.iter().enumerate() {
                m.insert((*t, s.clone()), raw.values.get(r, i));
            }
        }
        m
    };
    let rows: Vec<NaiveDateTime> = pred
        .times
        .iter()
        .copied()
        .filter(|t| {
            pred.sites.iter().all(|s| {
                let k = (*t, s.clone());
                pred.cells.contains_key(&k) && truth.contains_key(&k)
            })
        })
        .collect();
    let skipped = pred.times.len() - rows.len();
    if skipped > 0 {
        log::warn!("{skipped} timestamps lack a prediction or observation for some site; skipped");
    }
    if rows.is_empty() {
        return Err(GgpError::ShapeMismatch("no timestamps in common".into()));
    }
    let p = pred.sites.len();
    let cell = |r: usize, i: usize| pred.cells[&(rows[r], pred.sites[i].clone())];
    let mean = Mat::from_fn(rows.len(), p, |r, i| cell(r, i).0);
    let var = Mat::from_fn(rows.len(), p, |r, i| cell(r, i).1);
    let y = Mat::from_fn(rows.len(), p, |r, i| {
        truth[&(rows[r], pred.sites[i].clone())]
    });
    let report = score(&mean, &var, &y)?;
    write_atomic(&a.output, report.to_csv(&pred.sites).as_bytes())?;
    log::info!(
        "rmse {:.6} mae {:.6} nlpd {:.6} over {} rows; wrote {}",
        report.pooled.rmse,
        report.pooled.mae,
        report.pooled.nlpd,
        rows.len(),
        a.output.display()
    );
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let Prepared {
        cfg,
        train,
        test,
        coords,
        ..
    } = prepare(&a.config)?;
    let state = build_state(&cfg.model, &train, &coords, cfg.train.seed)?;
    let x_test = if test.is_empty() { &train.x } else { &test.x };
    let report = benchmark(
        &state,
        DataView {
            x: &train.x,
            y: &train.y,
        },
        x_test,
        &cfg.train,
        a.repetitions,
    )?;
    let out = a.output.unwrap_or_else(|| cfg.output_dir.join("bench.csv"));
    create_parent(&out)?;
    write_atomic(&out, report.to_csv().as_bytes())?;
    log::info!("wrote {}", out.display());
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            toml::from_str(&text).map_err(|e| GgpError::Config(format!("{}: {e}", p.display())))?
        }
        None => SynthConfig::default(),
    };
    if let Some(v) = a.sites {
        cfg.sites = v;
    }
    if let Some(v) = a.rows {
        cfg.rows = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.noise_std {
        cfg.noise_std = v;
    }
    if let Some(v) = &a.preset {
        cfg.preset = match v.as_str() {
            "rbf_h" | "rbf-h" => SynthPreset::RbfH,
            "constant" => SynthPreset::Constant,
            _ => return Err(GgpError::Config(format!("unknown preset {v:?}"))),
        };
    }
    let out = synth_generate(&cfg)?;
    create_parent(&a.output)?;
    let files = write_synth(&out, &cfg, &a.output)?;
    log::info!(
        "wrote {} ({} rows, {} sites); correlation by distance {:?}",
        files.data.display(),
        out.raw.timestamps.len(),
        cfg.sites,
        out.check.mean_correlation
    );
    Ok(())
}

fn verify(a: VerifyArgs) -> Result<()> {
    let Prepared {
        cfg, train, coords, ..
    } = prepare(&a.config)?;
    let state: GgpState<f64> = build_state(&cfg.model, &train, &coords, cfg.train.seed)?;
    let mut s = String::from("group,size,mode,cross_covariance,max_violation,tol,pass\n");
    let mut failed = 0;
    for g in &state.model.groups {
        let mode = format!("{:?}", g.mode).to_lowercase();
        let (kind, violation, pass) = match &g.h_cov {
            CrossCovariance::Kernel(k) => {
                let r = verify_implicit_sparsity(k, &g.h_features, 0, a.tol)?;
                (
                    "kernel",
                    format!("{:e}", r.max_violation),
                    r.pass.to_string(),
                )
            }
            CrossCovariance::Free(_) => ("free", String::new(), "n/a".into()),
            CrossCovariance::Unit => ("unit", String::new(), "n/a".into()),
        };
        if pass == "false" {
            failed += 1;
        }
        s.push_str(&format!(
            "{},{},{mode},{kind},{violation},{:e},{pass}\n",
            g.group_id,
            g.size(),
            a.tol
        ));
    }
    let out = a
        .output
        .unwrap_or_else(|| cfg.output_dir.join("verify_kernel.csv"));
    create_parent(&out)?;
    write_atomic(&out, s.as_bytes())?;
    log::info!(
        "{failed} groups violate the identity; wrote {}",
        out.display()
    );
    Ok(())
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => Ok(std::fs::create_dir_all(d)?),
        _ => Ok(()),
    }
}
