//! Full-test prediction time as the number of sites grows, on synthetic data
//! with matched row counts and an untrained model.
//!
//! cargo run --release --example benchmark -- [sites...]

use std::time::Instant;

use sparse_ggp::config::{build_state, ModelConfig};
use sparse_ggp::data::{from_raw, DataConfig};
use sparse_ggp::forecast::{predict, PredictOptions};
use sparse_ggp::synth::{synth_generate, SynthConfig};

fn main() -> sparse_ggp::Result<()> {
    let mut sites: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|s| s.parse().ok())
        .collect();
    if sites.is_empty() {
        sites = vec![5, 10, 25, 50];
    }
    println!("sites,latents,test_points,predict_secs,secs_per_point");
    let mut prev: Option<(usize, f64)> = None;
    for p in sites {
        let synth = SynthConfig {
            sites: p,
            rows: 400,
            seed: 3,
            ..SynthConfig::default()
        };
        let out = synth_generate(&synth)?;
        let ds = from_raw(
            out.raw,
            &DataConfig {
                cadence_minutes: Some(synth.cadence_minutes),
                ..DataConfig::default()
            },
            None,
        )?;
        let (train, test) = ds.split(0.25)?;
        let state = build_state(&ModelConfig::default(), &train, &out.coords, 3)?;
        let opts = PredictOptions::new(200, 3);
        predict(&state, &test.x, opts)?;
        let t0 = Instant::now();
        predict(&state, &test.x, opts)?;
        let secs = t0.elapsed().as_secs_f64();
        println!(
            "{p},{},{},{secs:.4},{:.3e}",
            p * p + p,
            test.len(),
            secs / test.len() as f64
        );
        if let Some((q, s)) = prev {
            eprintln!("  time ratio P={p} / P={q}: {:.2}", secs / s);
        }
        prev = Some((p, secs));
    }
    Ok(())
}
