//! Train with the contrastive item-representation objective on synthetic
//! data whose items live in disjoint co-occurrence clusters, then measure
//! how well the learned embeddings separate the clusters.
//!
//! Run with: cargo run --release -p hicg --example train_contrastive

use hicg::autodiff::Matrix;
use hicg::ingest::split_all;
use hicg::model::{ModelConfig, ModelParams};
use hicg::run::{cmd_preprocess, RunConfig};
use hicg::synth::{generate, to_canonical_csv, SynthSpec};
use hicg::train::{HyperParams, Trainer};
use hicg::ingest::artifact::load_artifact;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Cluster of an embedding row: vocabulary indices are assigned by first
/// appearance, so map each row back through its token to the generator's
/// item number.
fn row_clusters(vocab: &hicg::ingest::Vocab, n_items: usize, clusters: usize) -> Vec<usize> {
    (0..n_items)
        .map(|row| {
            let token = vocab.token(row).unwrap();
            let item: usize = token[4..].parse().unwrap();
            item / (n_items / clusters)
        })
        .collect()
}

fn mean_cosine_gap(embedding: &Matrix, cluster_of: &[usize]) -> (f64, f64) {
    let n_items = cluster_of.len();
    let cos = |a: usize, b: usize| {
        let (ra, rb) = (embedding.row(a), embedding.row(b));
        let dot: f64 = ra.iter().zip(rb.iter()).map(|(x, y)| x * y).sum();
        let na: f64 = ra.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = rb.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb + 1e-12)
    };
    let (mut intra, mut n_intra, mut inter, mut n_inter) = (0.0, 0usize, 0.0, 0usize);
    for a in 0..n_items {
        for b in (a + 1)..n_items {
            if cluster_of[a] == cluster_of[b] {
                intra += cos(a, b);
                n_intra += 1;
            } else {
                inter += cos(a, b);
                n_inter += 1;
            }
        }
    }
    (intra / n_intra as f64, inter / n_inter as f64)
}

fn main() -> Result<(), hicg::Error> {
    // Optional positional overrides: epochs, temperature, sessions.
    let args: Vec<String> = std::env::args().skip(1).collect();
    let epochs: usize = args.first().and_then(|a| a.parse().ok()).unwrap_or(10);
    let temperature: f64 = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(0.2);
    let n_sessions: usize = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(1000);

    let dir = std::env::temp_dir().join("hicg-example-contrastive");
    std::fs::create_dir_all(&dir).unwrap();

    let spec = SynthSpec {
        n_items: 50,
        n_types: 2,
        n_sessions,
        clusters: 5,
        seed: 21,
        ..SynthSpec::default()
    };
    let events = generate(&spec)?.events;
    let csv_path = dir.join("events.csv");
    std::fs::write(&csv_path, to_canonical_csv(&events)).unwrap();

    let mut cfg = RunConfig::default();
    cfg.input = csv_path.display().to_string();
    cfg.processed_dir = dir.join("processed");
    cfg.test_window_days = 0.02;
    cfg.hyper = HyperParams {
        epochs,
        lambda_cl: 0.1,
        beta: 0.2,
        temperature,
        seed: 21,
        ..HyperParams::default()
    };
    cmd_preprocess(&cfg)?;

    let dataset = load_artifact(&cfg.processed_dir)?;
    let samples = split_all(&dataset.train_sessions, dataset.target_type, true);
    println!(
        "{} items in {} clusters, {} training samples",
        dataset.n_items(),
        spec.clusters,
        samples.len()
    );

    let model_config = ModelConfig {
        n_items: dataset.n_items(),
        n_types: dataset.n_behavior_types(),
        d: cfg.hyper.d,
        steps: cfg.hyper.ggnn_steps,
    };
    let params = ModelParams::init(model_config, &mut ChaCha8Rng::seed_from_u64(cfg.hyper.seed));

    let clusters = row_clusters(&dataset.item_vocab, dataset.n_items(), spec.clusters);
    let (intra0, inter0) = mean_cosine_gap(params.embedding(), &clusters);
    println!("before training: intra={intra0:.4} inter={inter0:.4} gap={:.4}", intra0 - inter0);

    let mut trainer = Trainer::new(params, cfg.hyper.clone())?;
    for _ in 0..cfg.hyper.epochs {
        let stats = trainer.train_epoch(&samples)?;
        let (i, o) = mean_cosine_gap(trainer.params.embedding(), &clusters);
        println!(
            "{stats} union_graphs={} gap={:.4}",
            stats.union_graphs_built,
            i - o
        );
    }

    let (intra, inter) = mean_cosine_gap(trainer.params.embedding(), &clusters);
    println!("after training:  intra={intra:.4} inter={inter:.4} gap={:.4}", intra - inter);
    Ok(())
}
