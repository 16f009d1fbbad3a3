//! Trains the multi-site model on synthetic data and compares it with the
//! per-site mean and persistence forecasters.
//!
//! cargo run --release --example train_synthetic -- [epochs] [mode] [batch_size]

use sparse_ggp::config::{build_state, ModelConfig};
use sparse_ggp::data::{from_raw, DataConfig};
use sparse_ggp::forecast::{
    mean_baseline, metrics, persistence_baseline, predict, score, PredictOptions,
};
use sparse_ggp::model::SparsityMode;
use sparse_ggp::synth::{synth_generate, SynthConfig};
use sparse_ggp::trainer::{fit, TrainConfig};
use sparse_ggp::variational::DataView;

fn main() -> sparse_ggp::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let epochs = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let mode = match args.get(2).map(String::as_str) {
        Some("explicit") => SparsityMode::Explicit,
        Some("free") => SparsityMode::Free,
        _ => SparsityMode::Implicit,
    };

    let synth = SynthConfig {
        seed: 7,
        ..SynthConfig::default()
    };
    let out = synth_generate(&synth)?;
    println!(
        "site correlations by distance: {:?}",
        out.check.mean_correlation
    );

    let ds = from_raw(
        out.raw.clone(),
        &DataConfig {
            cadence_minutes: Some(5),
            ..DataConfig::default()
        },
        None,
    )?;
    let (train, test) = ds.split(0.2)?;
    println!(
        "train {} rows, test {} rows, {} inputs",
        train.len(),
        test.len(),
        train.x.cols()
    );

    let model_cfg = ModelConfig {
        sparsity_mode: mode,
        ..ModelConfig::default()
    };
    let mut state = build_state(&model_cfg, &train, &out.coords, 7)?;
    let batch_size = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(50);
    let cfg = TrainConfig {
        max_epochs: epochs,
        seed: 7,
        batch_size,
        ..TrainConfig::default()
    };
    let t0 = std::time::Instant::now();
    let report = fit(
        &mut state,
        DataView {
            x: &train.x,
            y: &train.y,
        },
        &cfg,
        None,
    )?;
    println!(
        "ELBO {:.2} -> {:.2} after {} epochs ({:?}) in {:.1?}",
        report.initial_elbo,
        report.final_elbo(),
        report.epochs.len(),
        report.stop_reason,
        t0.elapsed()
    );

    let pred = predict(&state, &test.x, PredictOptions::new(cfg.mc_samples_eval, 7))?;
    let y_raw = test.raw_y();
    let model = metrics(&pred, &y_raw, &test.denormalizer())?.pooled;
    let (mm, mv) = mean_baseline(&train.raw_y(), test.len());
    let mean = score(&mm, &mv, &y_raw)?.pooled;
    let (pm, pv) = persistence_baseline(
        &train.persistence_raw(),
        &train.raw_y(),
        &test.persistence_raw(),
    );
    let pers = score(&pm, &pv, &y_raw)?.pooled;
    for (name, m) in [("model", model), ("mean", mean), ("persistence", pers)] {
        println!(
            "{name:>12}: rmse {:.4} mae {:.4} nlpd {:.4} fvar {:.4}",
            m.rmse, m.mae, m.nlpd, m.fvar
        );
    }
    Ok(())
}
