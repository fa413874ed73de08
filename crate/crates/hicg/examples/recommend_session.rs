//! Train briefly, checkpoint, then score an inline session through the
//! recommendation path (the same flow as `hicg recommend`).
//!
//! Run with: cargo run --release -p hicg --example recommend_session

use hicg::run::{cmd_preprocess, cmd_recommend, cmd_train, RunConfig};
use hicg::synth::{generate, to_canonical_csv, SynthSpec};
use hicg::train::HyperParams;

fn main() -> Result<(), hicg::Error> {
    let dir = std::env::temp_dir().join("hicg-example-recommend");
    std::fs::create_dir_all(&dir).unwrap();

    let spec = SynthSpec {
        n_items: 30,
        n_types: 2,
        n_sessions: 800,
        seed: 31,
        ..SynthSpec::default()
    };
    let out = generate(&spec)?;
    let csv = dir.join("events.csv");
    std::fs::write(&csv, to_canonical_csv(&out.events)).unwrap();

    let mut cfg = RunConfig::default();
    cfg.input = csv.display().to_string();
    cfg.processed_dir = dir.join("processed");
    cfg.run_dir = Some(dir.join("run"));
    cfg.test_window_days = 0.02;
    cfg.mode = hicg::run::Mode::Hicg;
    cfg.hyper = HyperParams {
        d: 48,
        batch_size: 50,
        lambda_cl: 0.0,
        epochs: 15,
        seed: 31,
        ..HyperParams::default()
    };
    cfg.stop_at_val_hr5 = 0.9;

    cmd_preprocess(&cfg)?;
    let outcome = cmd_train(&cfg)?;

    // The generator's rule tells us what should follow item 4 after a view
    // vs after an add-to-cart; a type-aware model ranks those differently.
    let after_view = out.rule.next(4, 0);
    let after_cart = out.rule.next(4, 1);
    println!("rule: after item0004 a view leads to item{after_view:04}, a cart to item{after_cart:04}\n");

    for (session, target) in [
        ("item0002:view,item0004:view", after_view),
        ("item0002:view,item0004:cart", after_cart),
    ] {
        let rec = cmd_recommend(&cfg, &outcome.checkpoint_path, session, 3)?;
        println!("session [{session}] top-3:");
        for (token, score) in &rec.items {
            println!("  {token}  p={score:.4}");
        }
        let full = cmd_recommend(&cfg, &outcome.checkpoint_path, session, 30)?;
        let rank = full
            .items
            .iter()
            .position(|(t, _)| *t == format!("item{target:04}"))
            .map(|p| p + 1);
        println!("  rule successor item{target:04} ranked {rank:?} of 30\n");
    }
    Ok(())
}
