//! File-based workflow as the command-line tool runs it: write a synthetic
//! CSV, ingest it, train briefly, checkpoint, reload and score.
//!
//! cargo run --release --example forecast_pipeline -- [dir]

use std::path::PathBuf;

use sparse_ggp::checkpoint::Checkpoint;
use sparse_ggp::config::{build_state, ModelConfig, RunConfig};
use sparse_ggp::data::{ingest_csv, write_raw, write_sites, DataConfig};
use sparse_ggp::forecast::{metrics, predict, PredictOptions};
use sparse_ggp::synth::{synth_generate, SynthConfig};
use sparse_ggp::trainer::{fit, TrainConfig};
use sparse_ggp::variational::DataView;

fn main() -> sparse_ggp::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(std::env::temp_dir);
    std::fs::create_dir_all(&dir)?;
    let synth = synth_generate(&SynthConfig {
        sites: 3,
        rows: 800,
        seed: 4,
        ..SynthConfig::default()
    })?;
    let csv = dir.join("pipeline.csv");
    write_raw(&synth.raw, &csv)?;
    write_sites(
        &dir.join("pipeline.sites.csv"),
        &synth.raw.site_ids,
        &synth.coords,
    )?;

    let cfg = RunConfig {
        features: DataConfig {
            cadence_minutes: Some(5),
            ..DataConfig::default()
        },
        model: ModelConfig {
            inducing: 8,
            ..ModelConfig::default()
        },
        train: TrainConfig {
            max_epochs: 20,
            batch_size: 50,
            seed: 4,
            ..TrainConfig::default()
        },
        ..RunConfig::default()
    };

    let ds = ingest_csv(&csv, &cfg.features, None)?;
    println!("ingest: {:?}", ds.report);
    let (train, test) = ds.split(cfg.data.test_fraction)?;
    let mut state = build_state(&cfg.model, &train, &synth.coords, cfg.train.seed)?;
    let report = fit(
        &mut state,
        DataView {
            x: &train.x,
            y: &train.y,
        },
        &cfg.train,
        None,
    )?;
    println!(
        "ELBO {:.1} -> {:.1}",
        report.initial_elbo,
        report.final_elbo()
    );

    let ckpt = dir.join("pipeline.checkpoint.toml");
    Checkpoint::new(
        &state,
        &cfg,
        Some(&ds.norm),
        &ds.site_ids,
        None,
        report.epochs.len(),
        &report.elbo_trace(),
    )
    .save(&ckpt)?;
    let restored = Checkpoint::load(&ckpt)?.state()?;
    let pred = predict(
        &restored,
        &test.x,
        PredictOptions::new(cfg.train.mc_samples_eval, 4),
    )?;
    let m = metrics(&pred, &test.raw_y(), &test.denormalizer())?;
    print!("{}", m.to_csv(&test.site_ids));
    println!("checkpoint at {}", ckpt.display());
    Ok(())
}
