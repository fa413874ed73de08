//! Compare the trained model against the S-POP and session-KNN reference
//! rankers on a synthetic test split.
//!
//! Run with: cargo run --release -p hicg --example evaluate_baselines

use hicg::run::{cmd_evaluate, cmd_preprocess, cmd_train, RunConfig};
use hicg::synth::{generate, to_canonical_csv, SynthSpec};
use hicg::train::HyperParams;

fn main() -> Result<(), hicg::Error> {
    let dir = std::env::temp_dir().join("hicg-example-baselines");
    std::fs::create_dir_all(&dir).unwrap();

    let spec = SynthSpec {
        n_items: 30,
        n_types: 2,
        n_sessions: 1000,
        seed: 29,
        ..SynthSpec::default()
    };
    let events = generate(&spec)?.events;
    let csv = dir.join("events.csv");
    std::fs::write(&csv, to_canonical_csv(&events)).unwrap();

    let mut cfg = RunConfig::default();
    cfg.input = csv.display().to_string();
    cfg.processed_dir = dir.join("processed");
    cfg.run_dir = Some(dir.join("run"));
    cfg.report_path = Some(dir.join("report.json"));
    cfg.test_window_days = 0.1;
    cfg.baselines = true;
    cfg.mode = hicg::run::Mode::Hicg;
    cfg.hyper = HyperParams {
        d: 64,
        batch_size: 50,
        lambda_cl: 0.0,
        epochs: 20,
        seed: 29,
        ..HyperParams::default()
    };
    cfg.stop_at_val_hr5 = 0.9;

    cmd_preprocess(&cfg)?;
    let outcome = cmd_train(&cfg)?;
    let report = cmd_evaluate(&cfg, &outcome.checkpoint_path)?;

    println!("{} test samples\n", report.n_test_samples);
    println!("{:<8} {:>8} {:>8} {:>8} {:>8}", "ranker", "HR@5", "MRR@5", "HR@20", "MRR@20");
    for block in &report.blocks {
        let at = |k: usize| block.metrics.at(k).unwrap();
        println!(
            "{:<8} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            block.name,
            at(5).hr,
            at(5).mrr,
            at(20).hr,
            at(20).mrr
        );
    }
    println!("\nfull report written to {}", cfg.report_path.unwrap().display());
    Ok(())
}
