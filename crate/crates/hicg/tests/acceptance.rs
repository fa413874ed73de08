//! Acceptance suite. Each test is one criterion and prints a `[PASS]` line
//! with the measured evidence; run with `--nocapture` to see them:
//!
//!   cargo test -p hicg --test acceptance -- --nocapture

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use common::FIXTURE_CSV;
use hicg::autodiff::{Matrix, Tape};
use hicg::eval::{hr_at_k, mrr_at_k};
use hicg::graph::{
    build_session_graph, build_union_graph, connected_components, sample_cl_pairs, CLBatch,
    ComponentPartition, HeteroSessionGraph,
};
use hicg::ingest::{
    filter_dataset, sequence_split, split_all, Behavior, Session, TrainingSample,
};
use hicg::model::{DropoutMode, ModelConfig, ModelParams, SessionForward};
use hicg::run::{cmd_evaluate, cmd_preprocess, cmd_train, RunConfig};
use hicg::synth::SynthSpec;
use hicg::train::{loss_cl, loss_cl_on_tape, loss_total, HyperParams, Trainer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pass(name: &str, started: Instant, detail: &str) {
    println!(
        "[PASS] {name}: {detail} ({:.2}s)",
        started.elapsed().as_secs_f64()
    );
}

fn beh(item: usize, btype: usize, ts: i64) -> Behavior {
    Behavior {
        item,
        btype,
        timestamp: ts,
    }
}

fn session(id: &str, behaviors: &[(usize, usize)]) -> Session {
    Session {
        session_id: id.to_string(),
        behaviors: behaviors
            .iter()
            .enumerate()
            .map(|(t, &(item, btype))| beh(item, btype, t as i64))
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// Criterion: metric oracle equivalence
// ---------------------------------------------------------------------------

#[test]
fn metric_oracle_equivalence() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let ks = [5usize, 20];
    let mut cases = 0usize;
    for _ in 0..1000 {
        let n = rng.random_range(1..200);
        let ranks: Vec<usize> = (0..n).map(|_| rng.random_range(1..500)).collect();
        for &k in &ks {
            // Brute force, written independently: plain loops in input
            // order.
            let mut hits = 0usize;
            let mut reciprocal = 0.0f64;
            for &r in &ranks {
                if r <= k {
                    hits += 1;
                    reciprocal += 1.0 / r as f64;
                }
            }
            let oracle_hr = hits as f64 / n as f64;
            let oracle_mrr = reciprocal / n as f64;
            let got_hr = hr_at_k(&ranks, k).unwrap();
            let got_mrr = mrr_at_k(&ranks, k).unwrap();
            assert_eq!(got_hr.to_bits(), oracle_hr.to_bits(), "HR@{k} mismatch");
            assert_eq!(got_mrr.to_bits(), oracle_mrr.to_bits(), "MRR@{k} mismatch");
            assert!(got_mrr <= got_hr, "MRR@{k} must not exceed HR@{k}");
        }
        let hr5 = hr_at_k(&ranks, 5).unwrap();
        let hr20 = hr_at_k(&ranks, 20).unwrap();
        let mrr5 = mrr_at_k(&ranks, 5).unwrap();
        let mrr20 = mrr_at_k(&ranks, 20).unwrap();
        assert!(hr5 <= hr20 && mrr5 <= mrr20, "monotonicity in K");
        cases += 1;
    }
    assert!(started.elapsed().as_secs_f64() < 5.0, "runtime bound");
    pass(
        "metric oracle equivalence",
        started,
        &format!("{cases} random rank lists, K in {{5, 20}}, exact match"),
    );
}

// ---------------------------------------------------------------------------
// Criterion: InfoNCE oracle
// ---------------------------------------------------------------------------

/// Independent term-by-term evaluation: explicit cosine, explicit exp ratio.
fn infonce_oracle(batch: &CLBatch, embedding: &Matrix, temperature: f64) -> f64 {
    let cos = |a: usize, b: usize| -> f64 {
        let (ra, rb) = (embedding.row(a), embedding.row(b));
        let mut dot = 0.0;
        let mut na = 0.0;
        let mut nb = 0.0;
        for (x, y) in ra.iter().zip(rb.iter()) {
            dot += x * y;
            na += x * x;
            nb += y * y;
        }
        dot / ((na.sqrt() + 1e-12) * (nb.sqrt() + 1e-12))
    };
    // component label -> (sum of terms, count)
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for e in &batch.entries {
        let numerator = (cos(e.anchor, e.positive) / temperature).exp();
        let mut denominator = numerator;
        for &neg in &e.negatives {
            denominator += (cos(e.anchor, neg) / temperature).exp();
        }
        let term = -(numerator / denominator).ln();
        let slot = acc.entry(e.component).or_insert((0.0, 0));
        slot.0 += term;
        slot.1 += 1;
    }
    acc.values().map(|(s, n)| s / *n as f64).sum()
}

#[test]
fn infonce_oracle_equivalence() {
    let started = Instant::now();
    let temperatures = [0.1, 0.2, 1.0];
    let mut rng = ChaCha8Rng::seed_from_u64(31337);
    for case in 0..200 {
        // Random partition with components of size <= 5.
        let n_components = rng.random_range(2..5);
        let mut next_item = 0usize;
        let mut components = Vec::new();
        for _ in 0..n_components {
            let size = rng.random_range(1..=5);
            let c: Vec<usize> = (next_item..next_item + size).collect();
            next_item += size;
            components.push(c);
        }
        let batch_nodes: Vec<usize> = (0..next_item).collect();
        let partition = ComponentPartition {
            components,
            batch_nodes,
        };
        let beta = rng.random_range(0.1..1.0);
        let batch = sample_cl_pairs(&partition, beta, &mut rng).unwrap();
        let embedding = Matrix::from_shape_fn((next_item, 4), |_| rng.random_range(-1.0..1.0));
        let temperature = temperatures[case % temperatures.len()];

        let oracle = infonce_oracle(&batch, &embedding, temperature);
        let got = loss_cl(&batch, &embedding, temperature).unwrap();
        assert!(
            (got - oracle).abs() <= 1e-6,
            "case {case}: {got} vs oracle {oracle}"
        );

        // The differentiable path agrees too.
        let mut tape = Tape::new();
        let e = tape.param("embedding", &embedding);
        if let Some(var) = loss_cl_on_tape(&mut tape, e, &batch, temperature) {
            assert!((tape.scalar(var) - oracle).abs() <= 1e-6);
        } else {
            assert!(batch.is_empty());
        }
    }

    // Analytic case: identical unit anchor/positive, one orthogonal
    // negative, tau = 1, one entry per anchor of a two-item component.
    let embedding = ndarray::array![[1.0, 0.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]];
    let batch = CLBatch {
        entries: vec![
            hicg::graph::ClEntry {
                anchor: 0,
                positive: 1,
                negatives: vec![2],
                component: 0,
            },
            hicg::graph::ClEntry {
                anchor: 1,
                positive: 0,
                negatives: vec![2],
                component: 0,
            },
        ],
    };
    let expected = (1.0 + (-1.0f64).exp()).ln();
    let got = loss_cl(&batch, &embedding, 1.0).unwrap();
    assert!(
        (got - expected).abs() <= 1e-6,
        "analytic case: {got} vs log(1+e^-1) = {expected}"
    );

    assert!(started.elapsed().as_secs_f64() < 10.0, "runtime bound");
    pass(
        "InfoNCE oracle",
        started,
        &format!(
            "200 random batches at tau in {{0.1, 0.2, 1.0}} within 1e-6; analytic case = {expected:.5}"
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion: gradient check
// ---------------------------------------------------------------------------

struct GradFixture {
    samples: Vec<TrainingSample>,
    cl_batch: CLBatch,
    lambda: f64,
    temperature: f64,
}

fn grad_fixture() -> GradFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut samples = Vec::new();
    for s in 0..6usize {
        let len = 2 + (s % 3);
        let prefix: Vec<Behavior> = (0..len)
            .map(|t| beh(rng.random_range(0..12), rng.random_range(0..2), t as i64))
            .collect();
        samples.push(TrainingSample {
            prefix,
            label_item: rng.random_range(0..12),
            label_type: 0,
        });
    }
    let prefix_sessions: Vec<Session> = samples
        .iter()
        .map(|s| Session {
            session_id: String::new(),
            behaviors: s.prefix.clone(),
        })
        .collect();
    let union = build_union_graph(&prefix_sessions, 2);
    let partition = connected_components(&union);
    let cl_batch = sample_cl_pairs(&partition, 0.5, &mut rng).unwrap();
    assert!(!cl_batch.is_empty(), "fixture must exercise the CL term");
    GradFixture {
        samples,
        cl_batch,
        lambda: 0.1,
        temperature: 0.2,
    }
}

/// loss_total = mean cross-entropy + lambda * contrastive term, on a tape.
fn fixture_loss(params: &ModelParams, fx: &GradFixture) -> (Tape, hicg::autodiff::Var) {
    let mut tape = Tape::new();
    let mut terms = Vec::new();
    for s in &fx.samples {
        let fwd = SessionForward::new(params, &s.prefix);
        let out = fwd.run(&mut tape, DropoutMode::Off).unwrap();
        terms.push(tape.neg_log_softmax(out.logits, s.label_item));
    }
    let l_rec = tape.mean_scalars(&terms);
    let embedding = tape.param("embedding", params.get("embedding"));
    let cl = loss_cl_on_tape(&mut tape, embedding, &fx.cl_batch, fx.temperature).unwrap();
    let scaled = tape.scale(cl, fx.lambda);
    let total = tape.add(l_rec, scaled);
    (tape, total)
}

#[test]
fn gradient_check_against_finite_differences() {
    let started = Instant::now();
    let cfg = ModelConfig {
        n_items: 12,
        n_types: 2,
        d: 8,
        steps: 1,
    };
    let params = ModelParams::init(cfg, &mut ChaCha8Rng::seed_from_u64(42));
    let fx = grad_fixture();

    let (tape, total) = fixture_loss(&params, &fx);
    let analytic = tape.backward(total);
    drop(tape);

    let eval = |p: &ModelParams| -> f64 {
        let (tape, total) = fixture_loss(p, &fx);
        tape.scalar(total)
    };

    let step = 1e-3;
    let mut worst: (String, f64) = (String::new(), 0.0);
    for (name, tensor) in &params.tensors {
        let mut fd = Matrix::zeros(tensor.dim());
        for r in 0..tensor.nrows() {
            for c in 0..tensor.ncols() {
                let mut plus = params.clone();
                plus.tensors.get_mut(name).unwrap()[[r, c]] += step;
                let mut minus = params.clone();
                minus.tensors.get_mut(name).unwrap()[[r, c]] -= step;
                fd[[r, c]] = (eval(&plus) - eval(&minus)) / (2.0 * step);
            }
        }
        let an = &analytic[name];
        let num = (an - &fd).iter().map(|x| x * x).sum::<f64>().sqrt();
        let den = fd.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-10);
        let rel = num / den;
        assert!(
            rel <= 1e-3,
            "parameter group `{name}`: relative error {rel:.3e} exceeds 1e-3"
        );
        if rel > worst.1 {
            worst = (name.clone(), rel);
        }
    }
    assert!(started.elapsed().as_secs_f64() < 60.0, "runtime bound");
    pass(
        "gradient check",
        started,
        &format!(
            "{} parameter groups within 1e-3 of central differences (worst `{}` at {:.2e})",
            params.tensors.len(),
            worst.0,
            worst.1
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion: graph-construction fixtures
// ---------------------------------------------------------------------------

/// Brute-force connectivity by transitive closure over an adjacency bitmap.
fn closure_components(nodes: &[usize], edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let n = nodes.len();
    let index: BTreeMap<usize, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        reach[i][i] = true;
    }
    for &(a, b) in edges {
        reach[index[&a]][index[&b]] = true;
        reach[index[&b]][index[&a]] = true;
    }
    loop {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if !reach[i][j] {
                    continue;
                }
                for k in 0..n {
                    if reach[j][k] && !reach[i][k] {
                        reach[i][k] = true;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for i in 0..n {
        if seen[i] {
            continue;
        }
        let mut comp = Vec::new();
        for j in 0..n {
            if reach[i][j] {
                seen[j] = true;
                comp.push(nodes[j]);
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out.sort();
    out
}

#[test]
fn graph_construction_fixtures() {
    let started = Instant::now();

    // Fixture 1: a single behavior.
    let g = build_session_graph(&session("f1", &[(7, 0)]), 2);
    assert_eq!(g.nodes, vec![7]);
    assert_eq!(g.total_multiplicity(), 0);

    // Fixture 2: A:view B:view A:cart C:view.
    let (a, b, c) = (0, 1, 2);
    let g = build_session_graph(&session("f2", &[(a, 0), (b, 0), (a, 1), (c, 0)]), 2);
    let rel = |s, d| HeteroSessionGraph::relation_id(2, s, d);
    assert_eq!(g.nodes, vec![a, b, c]);
    assert_eq!(g.edge_mult.len(), 3);
    assert_eq!(g.edge_mult[&(0, 1, rel(0, 0))], 1);
    assert_eq!(g.edge_mult[&(1, 0, rel(0, 1))], 1);
    assert_eq!(g.edge_mult[&(0, 2, rel(1, 0))], 1);
    for (&(src, dst, r), _) in &g.edge_mult {
        assert_eq!(g.adj_out[r][[src, dst]], 1.0);
        assert_eq!(g.adj_in[r][[dst, src]], 1.0);
    }

    // Fixture 3: A,B,A,B all views.
    let g = build_session_graph(&session("f3", &[(0, 0), (1, 0), (0, 0), (1, 0)]), 1);
    assert_eq!(g.edge_mult[&(0, 1, 0)], 2);
    assert_eq!(g.edge_mult[&(1, 0, 0)], 1);
    assert_eq!(g.adj_out[0][[0, 1]], 1.0);
    assert_eq!(g.total_multiplicity(), 3);

    // Connected components against the transitive-closure oracle.
    let mut rng = ChaCha8Rng::seed_from_u64(555);
    for _ in 0..200 {
        let n_sessions = rng.random_range(1..7);
        let sessions: Vec<Session> = (0..n_sessions)
            .map(|i| {
                let len = rng.random_range(1..7);
                let behaviors: Vec<(usize, usize)> = (0..len)
                    .map(|_| (rng.random_range(0..20), rng.random_range(0..2)))
                    .collect();
                session(&format!("s{i}"), &behaviors)
            })
            .collect();
        let union = build_union_graph(&sessions, 2);
        assert!(union.nodes.len() <= 20);
        let ours = connected_components(&union);
        let oracle = closure_components(&union.nodes, &union.edges);
        assert_eq!(ours.components, oracle);
    }

    assert!(started.elapsed().as_secs_f64() < 5.0, "runtime bound");
    pass(
        "graph-construction fixtures",
        started,
        "3 hand-traced session graphs exact; 200 random unions match transitive closure",
    );
}

// ---------------------------------------------------------------------------
// Criterion: preprocessing law
// ---------------------------------------------------------------------------

#[test]
fn preprocessing_law_on_fixture() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("events.csv");
    std::fs::write(&csv_path, FIXTURE_CSV).unwrap();

    let mut cfg = RunConfig::default();
    cfg.input = csv_path.display().to_string();
    cfg.processed_dir = dir.path().join("p1");
    cfg.min_item_freq = 3;
    cfg.min_session_len = 2;
    cfg.test_window_days = 0.5;
    cfg.restrict_to_target = false;

    let manifest = cmd_preprocess(&cfg).unwrap();

    // Sample-count law on the post-filter sessions, restriction off.
    let dataset = hicg::ingest::artifact::load_artifact(&cfg.processed_dir).unwrap();
    let all: Vec<Session> = dataset
        .train_sessions
        .iter()
        .chain(dataset.test_sessions.iter())
        .cloned()
        .collect();
    let expected: usize = all.iter().map(|s| s.len() - 1).sum();
    let split_total: usize = all
        .iter()
        .map(|s| sequence_split(s, dataset.target_type, false).len())
        .sum();
    assert_eq!(split_total, expected, "sum of (s_T - 1)");
    let manifest_samples: usize = manifest.get("train_samples").unwrap().parse::<usize>().unwrap()
        + manifest.get("test_samples").unwrap().parse::<usize>().unwrap();
    assert_eq!(manifest_samples, expected);

    // Verified fixed point: both thresholds hold on a recount, and a second
    // application changes nothing.
    let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
    for s in &all {
        assert!(s.len() >= 2);
        for b in &s.behaviors {
            *freq.entry(b.item).or_insert(0) += 1;
        }
    }
    for (_, n) in freq {
        assert!(n >= 3, "item frequency threshold violated after filtering");
    }
    let again = filter_dataset(&all, 2, 3).unwrap();
    assert_eq!(again, all, "filter must be a fixed point");

    // Rerun checksum identical.
    let mut cfg2 = cfg.clone();
    cfg2.processed_dir = dir.path().join("p2");
    let manifest2 = cmd_preprocess(&cfg2).unwrap();
    assert_eq!(manifest.get("checksum"), manifest2.get("checksum"));

    assert!(started.elapsed().as_secs_f64() < 2.0, "runtime bound");
    pass(
        "preprocessing law",
        started,
        &format!("{expected} samples = sum(s_T - 1); fixed point verified; checksums identical"),
    );
}

// ---------------------------------------------------------------------------
// Criterion: heterogeneity learnability
// ---------------------------------------------------------------------------

fn learnability_config(dir: &std::path::Path, collapse: bool) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.input = dir.join("events.csv").display().to_string();
    cfg.processed_dir = dir.join(if collapse { "processed-blind" } else { "processed" });
    cfg.run_dir = Some(dir.join(if collapse { "run-blind" } else { "run" }));
    cfg.collapse_types = collapse;
    cfg.test_window_days = 0.02;
    cfg.mode = hicg::run::Mode::Hicg;
    cfg.hyper = HyperParams {
        d: 100,
        dropout: 0.2,
        batch_size: 100,
        learning_rate: 3e-4,
        lambda_cl: 0.0,
        epochs: if collapse { 10 } else { 30 },
        seed: 11,
        ..HyperParams::default()
    };
    if !collapse {
        cfg.stop_at_val_hr5 = 0.9;
    }
    cfg
}

#[test]
fn heterogeneity_learnability() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();

    // 50 items, 2 behavior types, 2000 sessions; the next target-type item
    // is a deterministic function of the last item and the last behavior
    // type.
    let spec = SynthSpec {
        n_items: 50,
        n_types: 2,
        n_sessions: 2000,
        seed: 7,
        ..SynthSpec::default()
    };
    let events = hicg::synth::generate(&spec).unwrap().events;
    std::fs::write(dir.path().join("events.csv"), hicg::synth::to_canonical_csv(&events))
        .unwrap();

    // Type-aware run at the evaluated hyperparameters.
    let cfg = learnability_config(dir.path(), false);
    cmd_preprocess(&cfg).unwrap();
    let outcome = cmd_train(&cfg).unwrap();
    let best_hr5 = outcome
        .epochs
        .iter()
        .map(|e| e.val_hr5)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(
        best_hr5 >= 0.9,
        "type-aware model must reach validation HR@5 >= 0.9 within 30 epochs, got {best_hr5}"
    );

    // Type-blind ablation: all behavior types collapsed at ingest.
    let blind_cfg = learnability_config(dir.path(), true);
    cmd_preprocess(&blind_cfg).unwrap();
    let blind = cmd_train(&blind_cfg).unwrap();
    let blind_hr5 = blind
        .epochs
        .iter()
        .map(|e| e.val_hr5)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(
        blind_hr5 <= 0.6,
        "type-blind ablation must stay at or below HR@5 = 0.6, got {blind_hr5}"
    );

    assert!(
        started.elapsed().as_secs_f64() < 600.0,
        "runtime bound of 10 minutes"
    );
    pass(
        "heterogeneity learnability",
        started,
        &format!(
            "type-aware HR@5 = {best_hr5:.3} in {} epochs; type-blind HR@5 = {blind_hr5:.3}",
            outcome.epochs.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion: contrastive-learning efficacy
// ---------------------------------------------------------------------------

/// Mean intra-cluster minus mean inter-cluster cosine over embedding rows.
/// Vocabulary indices are first-appearance order, so rows map back to the
/// generator's item numbers through their tokens.
fn cosine_gap(embedding: &Matrix, vocab: &hicg::ingest::Vocab, clusters: usize) -> f64 {
    let n_items = vocab.len();
    let cluster_of: Vec<usize> = (0..n_items)
        .map(|row| {
            let item: usize = vocab.token(row).unwrap()[4..].parse().unwrap();
            item / (n_items / clusters)
        })
        .collect();
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
    intra / n_intra as f64 - inter / n_inter as f64
}

#[test]
fn contrastive_learning_efficacy() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();

    let spec = SynthSpec {
        n_items: 50,
        n_types: 2,
        n_sessions: 1000,
        clusters: 5,
        seed: 21,
        ..SynthSpec::default()
    };
    let events = hicg::synth::generate(&spec).unwrap().events;
    std::fs::write(dir.path().join("events.csv"), hicg::synth::to_canonical_csv(&events))
        .unwrap();

    let mut cfg = RunConfig::default();
    cfg.input = dir.path().join("events.csv").display().to_string();
    cfg.processed_dir = dir.path().join("processed");
    cfg.test_window_days = 0.02;
    cfg.hyper = HyperParams {
        lambda_cl: 0.1,
        beta: 0.2,
        epochs: 10,
        seed: 21,
        ..HyperParams::default()
    };
    cmd_preprocess(&cfg).unwrap();

    let dataset = hicg::ingest::artifact::load_artifact(&cfg.processed_dir).unwrap();
    let samples = split_all(&dataset.train_sessions, dataset.target_type, true);
    let model_config = ModelConfig {
        n_items: dataset.n_items(),
        n_types: dataset.n_behavior_types(),
        d: cfg.hyper.d,
        steps: cfg.hyper.ggnn_steps,
    };
    let params = ModelParams::init(model_config, &mut ChaCha8Rng::seed_from_u64(cfg.hyper.seed));
    let mut trainer = Trainer::new(params, cfg.hyper.clone()).unwrap();

    let mut l_cl_by_epoch = Vec::new();
    for _ in 0..cfg.hyper.epochs {
        let stats = trainer.train_epoch(&samples).unwrap();
        l_cl_by_epoch.push(stats.mean.l_cl);
    }
    assert!(
        l_cl_by_epoch[9] < l_cl_by_epoch[0],
        "epoch-mean contrastive loss must decrease from epoch 1 ({}) to epoch 10 ({})",
        l_cl_by_epoch[0],
        l_cl_by_epoch[9]
    );

    let gap = cosine_gap(trainer.params.embedding(), &dataset.item_vocab, spec.clusters);
    assert!(
        gap >= 0.1,
        "intra-cluster minus inter-cluster cosine must reach 0.1, got {gap}"
    );

    assert!(started.elapsed().as_secs_f64() < 600.0, "runtime bound");
    pass(
        "contrastive-learning efficacy",
        started,
        &format!(
            "cosine gap {gap:.3}; l_cl epoch1 {:.3} -> epoch10 {:.3}",
            l_cl_by_epoch[0], l_cl_by_epoch[9]
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion: determinism
// ---------------------------------------------------------------------------

#[test]
fn determinism_under_fixed_seed() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();

    let spec = SynthSpec {
        n_sessions: 200,
        seed: 3,
        ..SynthSpec::default()
    };
    let events = hicg::synth::generate(&spec).unwrap().events;
    std::fs::write(dir.path().join("events.csv"), hicg::synth::to_canonical_csv(&events))
        .unwrap();

    let run = |tag: &str| {
        let mut cfg = RunConfig::default();
        cfg.input = dir.path().join("events.csv").display().to_string();
        cfg.processed_dir = dir.path().join(format!("processed-{tag}"));
        cfg.run_dir = Some(dir.path().join(format!("run-{tag}")));
        cfg.report_path = Some(dir.path().join(format!("report-{tag}.json")));
        cfg.test_window_days = 0.02;
        cfg.hyper = HyperParams {
            d: 16,
            epochs: 2,
            seed: 99,
            ..HyperParams::default()
        };
        cmd_preprocess(&cfg).unwrap();
        let outcome = cmd_train(&cfg).unwrap();
        let report = cmd_evaluate(&cfg, &outcome.checkpoint_path).unwrap();
        (outcome, report)
    };

    let (out_a, rep_a) = run("a");
    let (out_b, rep_b) = run("b");

    for (a, b) in out_a.epochs.iter().zip(out_b.epochs.iter()) {
        assert_eq!(a.stats.mean.l_rec.to_bits(), b.stats.mean.l_rec.to_bits());
        assert_eq!(a.stats.mean.l_cl.to_bits(), b.stats.mean.l_cl.to_bits());
        assert_eq!(a.stats.mean.l_total.to_bits(), b.stats.mean.l_total.to_bits());
        assert_eq!(a.val_hr5.to_bits(), b.val_hr5.to_bits());
        assert_eq!(a.val_hr20.to_bits(), b.val_hr20.to_bits());
    }
    for (ba, bb) in rep_a.blocks.iter().zip(rep_b.blocks.iter()) {
        for (ma, mb) in ba.metrics.per_k.iter().zip(bb.metrics.per_k.iter()) {
            assert_eq!(ma.hr.to_bits(), mb.hr.to_bits());
            assert_eq!(ma.mrr.to_bits(), mb.mrr.to_bits());
        }
    }

    // Linearity of the joint objective in the contrastive weight.
    let (r, c) = (1.7, 2.3);
    assert_eq!(loss_total(r, c, 0.0), r);
    assert!((loss_total(r, c, 0.5) - loss_total(r, c, 0.4) - 0.1 * c).abs() < 1e-12);

    pass(
        "determinism",
        started,
        "epoch-1 and epoch-2 losses and final metrics bit-identical across two seeded runs",
    );
}
