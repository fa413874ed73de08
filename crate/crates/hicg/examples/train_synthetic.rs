//! End-to-end training on a small synthetic dataset: generate, preprocess,
//! train with early stopping, and report validation metrics per epoch.
//!
//! Run with: cargo run --release -p hicg --example train_synthetic

use hicg::run::{cmd_preprocess, cmd_train_with, RunConfig};
use hicg::synth::{generate, to_canonical_csv, SynthSpec};
use hicg::train::HyperParams;

fn main() -> Result<(), hicg::Error> {
    let dir = std::env::temp_dir().join("hicg-example-train");
    std::fs::create_dir_all(&dir).unwrap();

    let spec = SynthSpec {
        n_items: 30,
        n_types: 2,
        n_sessions: 800,
        seed: 17,
        ..SynthSpec::default()
    };
    let events = generate(&spec)?.events;
    let csv = dir.join("events.csv");
    std::fs::write(&csv, to_canonical_csv(&events)).unwrap();

    let mut cfg = RunConfig::default();
    cfg.input = csv.display().to_string();
    cfg.processed_dir = dir.join("processed");
    cfg.run_dir = Some(dir.join("run"));
    cfg.test_window_days = 0.02;
    cfg.mode = hicg::run::Mode::Hicg;
    // A narrower model than the evaluated d = 100 keeps the example quick.
    cfg.hyper = HyperParams {
        d: 48,
        batch_size: 50,
        lambda_cl: 0.0,
        epochs: 15,
        seed: 17,
        ..HyperParams::default()
    };
    cfg.stop_at_val_hr5 = 0.9;

    let manifest = cmd_preprocess(&cfg)?;
    println!(
        "preprocessed: {} train sessions, {} items",
        manifest["train_sessions"], manifest["items"]
    );

    let outcome = cmd_train_with(&cfg, |record| {
        println!(
            "{} val_hr5={:.3} val_hr20={:.3}",
            record.stats, record.val_hr5, record.val_hr20
        );
    })?;
    println!(
        "best epoch {} with validation HR@20 = {:.3}; checkpoint at {}",
        outcome.best_epoch,
        outcome.best_val_hr20,
        outcome.checkpoint_path.display()
    );
    Ok(())
}
