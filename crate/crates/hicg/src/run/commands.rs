//! Command implementations behind the `hicg` binary: preprocess, train,
//! evaluate, recommend and synthetic generation.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::baselines::{IKnn, SPop};
use crate::eval::{evaluate, top_k, MetricsReport, ScoreVector};
use crate::ingest::adapters::{parse_event_log, Adapter};
use crate::ingest::{
    artifact, build_dataset, filter_dataset, index_events, sessionize, split_all,
    take_recent_fraction, temporal_split, Behavior, Dataset, RawEvent, Session, TrainingSample,
    Vocab,
};
use crate::model::checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
use crate::model::{predict, ModelConfig, ModelParams};
use crate::run::config::RunConfig;
use crate::synth::{generate, to_canonical_csv};
use crate::train::{EpochStats, Trainer};

/// Fraction of training sessions (latest by start time) held out for
/// checkpoint selection.
const VALIDATION_FRACTION: f64 = 0.1;

/// Resolve the run directory: an explicit override, or
/// `run_root/<timestamp>-<confighash>`.
pub fn resolve_run_dir(cfg: &RunConfig) -> PathBuf {
    if let Some(dir) = &cfg.run_dir {
        return dir.clone();
    }
    let stamp = chrono::Utc::now().format("%Y%m%d-%H%M%S");
    cfg.run_root.join(format!("{stamp}-{}", cfg.hash()))
}

fn read_input_events(cfg: &RunConfig) -> Result<(Vec<RawEvent>, usize)> {
    let mut events = Vec::new();
    let mut malformed = 0usize;
    let sources: Vec<(PathBuf, Adapter)> = match cfg.adapter.as_str() {
        "canonical" => vec![(PathBuf::from(&cfg.input), Adapter::Canonical)],
        "yoochoose" => {
            let mut parts = cfg.input.split(',').map(str::trim);
            let clicks = parts
                .next()
                .filter(|s| !s.is_empty())
                .ok_or_else(|| Error::config("yoochoose adapter needs a clicks path".to_string()))?;
            let mut v = vec![(PathBuf::from(clicks), Adapter::YoochooseClicks)];
            if let Some(buys) = parts.next() {
                v.push((PathBuf::from(buys), Adapter::YoochooseBuys));
            }
            v
        }
        other => return Err(Error::config(format!("unknown adapter `{other}`"))),
    };
    for (path, adapter) in sources {
        let file = fs::File::open(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let outcome = parse_event_log(file, adapter, cfg.strict_parse)?;
        malformed += outcome.malformed;
        events.extend(outcome.events);
    }
    Ok((events, malformed))
}

/// Run the full preprocessing pipeline and write the processed artifact.
/// Returns the manifest.
pub fn cmd_preprocess(cfg: &RunConfig) -> Result<BTreeMap<String, String>> {
    let (mut events, malformed) = read_input_events(cfg)?;

    // The type-blind ablation folds every behavior into the target label
    // before anything else sees the data.
    if cfg.collapse_types {
        for e in &mut events {
            e.behavior_label = cfg.target_behavior.clone();
        }
    }
    let behavior_tokens: Vec<String> = if cfg.collapse_types {
        vec![cfg.target_behavior.clone()]
    } else {
        cfg.behaviors.clone()
    };
    let behavior_vocab = Vocab::from_tokens(behavior_tokens)?;

    let mut working_items = Vocab::new();
    let indexed = index_events(&events, &mut working_items, &behavior_vocab)?;
    let sessions = sessionize(&indexed, cfg.sessionize_mode())?;
    let filtered = filter_dataset(&sessions, cfg.min_session_len, cfg.min_item_freq)?;
    if filtered.is_empty() {
        return Err(Error::data(
            "no sessions survive filtering; check thresholds and input".to_string(),
        ));
    }
    let (train, test) = temporal_split(&filtered, cfg.test_window_ms());
    let train = take_recent_fraction(&train, cfg.fraction);
    if train.is_empty() {
        return Err(Error::data("training split is empty after the temporal split".to_string()));
    }
    let (dataset, remap_stats) = build_dataset(
        &train,
        &test,
        behavior_vocab,
        &cfg.target_behavior,
        &working_items,
    )?;
    if dataset.train_sessions.is_empty() {
        return Err(Error::data("training set is empty after vocabulary remap".to_string()));
    }

    let train_samples = split_all(
        &dataset.train_sessions,
        dataset.target_type,
        cfg.restrict_to_target,
    )
    .len();
    let test_samples = split_all(
        &dataset.test_sessions,
        dataset.target_type,
        cfg.restrict_to_target,
    )
    .len();

    let mut extra = BTreeMap::new();
    extra.insert("adapter".to_string(), cfg.adapter.clone());
    extra.insert("sessionize_by".to_string(), cfg.sessionize_by.clone());
    extra.insert("gap_minutes".to_string(), cfg.gap_minutes.to_string());
    extra.insert("min_session_len".to_string(), cfg.min_session_len.to_string());
    extra.insert("min_item_freq".to_string(), cfg.min_item_freq.to_string());
    extra.insert("test_window_days".to_string(), cfg.test_window_days.to_string());
    extra.insert("fraction".to_string(), cfg.fraction.to_string());
    extra.insert("restrict_to_target".to_string(), cfg.restrict_to_target.to_string());
    extra.insert("collapse_types".to_string(), cfg.collapse_types.to_string());
    extra.insert("malformed_records".to_string(), malformed.to_string());
    extra.insert("train_samples".to_string(), train_samples.to_string());
    extra.insert("test_samples".to_string(), test_samples.to_string());
    extra.insert(
        "test_dropped_behaviors".to_string(),
        remap_stats.dropped_behaviors.to_string(),
    );
    extra.insert(
        "test_dropped_sessions".to_string(),
        remap_stats.dropped_sessions.to_string(),
    );

    artifact::write_artifact(&cfg.processed_dir, &dataset, &extra)
}

/// Split the training sessions into a fit part and a validation tail (the
/// most recent tenth by start time).
pub fn validation_split(sessions: &[Session]) -> (Vec<Session>, Vec<Session>) {
    let n = sessions.len();
    let n_val = ((n as f64 * VALIDATION_FRACTION).floor() as usize).clamp(1, n.saturating_sub(1).max(1));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (sessions[i].start_ts(), i));
    let val_set: std::collections::BTreeSet<usize> =
        order[n - n_val..].iter().copied().collect();
    let mut fit = Vec::with_capacity(n - n_val);
    let mut val = Vec::with_capacity(n_val);
    for (i, s) in sessions.iter().enumerate() {
        if val_set.contains(&i) {
            val.push(s.clone());
        } else {
            fit.push(s.clone());
        }
    }
    (fit, val)
}

/// One epoch record in the training log.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EpochRecord {
    pub stats: EpochStats,
    pub val_hr5: f64,
    pub val_hr20: f64,
    pub val_mrr20: f64,
}

/// Outcome of a training run.
#[derive(Debug)]
pub struct TrainOutcome {
    pub run_dir: PathBuf,
    pub checkpoint_path: PathBuf,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_hr20: f64,
}

fn model_scorer(params: &ModelParams) -> impl Fn(&TrainingSample) -> Result<ScoreVector> + '_ {
    move |sample: &TrainingSample| predict(params, &sample.prefix)
}

/// Train on the processed artifact, checkpointing the best epoch by
/// validation HR@20.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainOutcome> {
    cmd_train_with(cfg, |_| {})
}

/// Same as [`cmd_train`] but streams every epoch record to `on_epoch`.
pub fn cmd_train_with<F: FnMut(&EpochRecord)>(
    cfg: &RunConfig,
    mut on_epoch: F,
) -> Result<TrainOutcome> {
    let dataset = artifact::load_artifact(&cfg.processed_dir)?;
    let vocab_checksum =
        artifact::vocab_checksum(&dataset.item_vocab, &dataset.behavior_vocab);
    if dataset.train_sessions.len() < 2 {
        return Err(Error::data(
            "need at least two training sessions to carve out validation".to_string(),
        ));
    }

    let (fit_sessions, val_sessions) = validation_split(&dataset.train_sessions);
    let fit_samples = split_all(&fit_sessions, dataset.target_type, cfg.restrict_to_target);
    let val_samples = split_all(&val_sessions, dataset.target_type, cfg.restrict_to_target);
    if fit_samples.is_empty() {
        return Err(Error::data("no training samples after sequence splitting".to_string()));
    }
    if val_samples.is_empty() {
        return Err(Error::data("no validation samples; dataset too small".to_string()));
    }

    let run_dir = resolve_run_dir(cfg);
    fs::create_dir_all(&run_dir).map_err(|e| Error::io(run_dir.display().to_string(), e))?;
    let log_path = run_dir.join("epochs.log");
    let mut log = fs::File::create(&log_path)
        .map_err(|e| Error::io(log_path.display().to_string(), e))?;
    fs::write(run_dir.join("config.echo"), cfg.echo())
        .map_err(|e| Error::io(run_dir.display().to_string(), e))?;

    let model_config = ModelConfig {
        n_items: dataset.n_items(),
        n_types: dataset.n_behavior_types(),
        d: cfg.hyper.d,
        steps: cfg.hyper.ggnn_steps,
    };
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.hyper.seed);
    init_rng.set_stream(0);
    let params = ModelParams::init(model_config, &mut init_rng);
    let mut trainer = Trainer::new(params, cfg.hyper.clone())?;

    let mut epochs: Vec<EpochRecord> = Vec::new();
    let mut best_epoch = 0usize;
    let mut best_val_hr20 = f64::NEG_INFINITY;
    let mut best_params: Option<ModelParams> = None;
    let mut since_best = 0usize;

    for _ in 0..cfg.hyper.epochs {
        let stats = trainer.train_epoch(&fit_samples)?;
        let report = evaluate(model_scorer(&trainer.params), &val_samples, &[5, 20])?;
        let record = EpochRecord {
            val_hr5: report.at(5).map_or(0.0, |m| m.hr),
            val_hr20: report.at(20).map_or(0.0, |m| m.hr),
            val_mrr20: report.at(20).map_or(0.0, |m| m.mrr),
            stats,
        };
        writeln!(log, "{}", record.stats).map_err(|e| Error::io(log_path.display().to_string(), e))?;
        on_epoch(&record);

        if record.val_hr20 > best_val_hr20 {
            best_val_hr20 = record.val_hr20;
            best_epoch = record.stats.epoch;
            best_params = Some(trainer.params.clone());
            since_best = 0;
        } else {
            since_best += 1;
        }
        let reached_target =
            cfg.stop_at_val_hr5 > 0.0 && record.val_hr5 >= cfg.stop_at_val_hr5;
        let out_of_patience = cfg.patience > 0 && since_best >= cfg.patience;
        epochs.push(record);
        if reached_target || out_of_patience {
            break;
        }
    }

    let checkpoint_path = run_dir.join("checkpoint.bin");
    let best_params = best_params.expect("at least one epoch ran");
    save_checkpoint(
        &checkpoint_path,
        &best_params,
        &CheckpointMeta {
            hyper: cfg.hyper.clone(),
            vocab_checksum,
            config_echo: cfg.echo(),
        },
    )?;

    let metrics_path = run_dir.join("train_metrics.json");
    let json = serde_json::json!({
        "mode": cfg.mode.as_str(),
        "best_epoch": best_epoch,
        "best_val_hr20": best_val_hr20,
        "epochs": epochs,
    });
    fs::write(&metrics_path, serde_json::to_string_pretty(&json).unwrap())
        .map_err(|e| Error::io(metrics_path.display().to_string(), e))?;

    Ok(TrainOutcome {
        run_dir,
        checkpoint_path,
        epochs,
        best_epoch,
        best_val_hr20,
    })
}

/// One named result block in the evaluation report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ReportBlock {
    pub name: String,
    pub metrics: MetricsReport,
}

/// Full evaluation report, serialized as JSON.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EvalReport {
    pub run_id: String,
    pub version: String,
    pub config_echo: String,
    pub n_test_samples: usize,
    pub blocks: Vec<ReportBlock>,
}

/// Evaluate a checkpoint on the artifact's test split; optionally add the
/// S-POP and session-KNN reference blocks.
pub fn cmd_evaluate(cfg: &RunConfig, checkpoint: &Path) -> Result<EvalReport> {
    let dataset = artifact::load_artifact(&cfg.processed_dir)?;
    let (params, meta) = load_checkpoint(checkpoint)?;
    let vocab_checksum =
        artifact::vocab_checksum(&dataset.item_vocab, &dataset.behavior_vocab);
    if meta.vocab_checksum != vocab_checksum {
        return Err(Error::data(format!(
            "checkpoint was trained against different vocabularies \
             (checkpoint {}, dataset {}); refusing to evaluate",
            meta.vocab_checksum, vocab_checksum
        )));
    }
    if params.config.n_items != dataset.n_items()
        || params.config.n_types != dataset.n_behavior_types()
    {
        return Err(Error::data("checkpoint shape does not match the dataset".to_string()));
    }

    let test_samples = split_all(
        &dataset.test_sessions,
        dataset.target_type,
        cfg.restrict_to_target,
    );
    if test_samples.is_empty() {
        return Err(Error::data("no test samples to evaluate".to_string()));
    }

    let mut blocks = Vec::new();
    let model_report = evaluate(model_scorer(&params), &test_samples, &cfg.eval_ks)?;
    blocks.push(ReportBlock {
        name: "model".to_string(),
        metrics: model_report,
    });

    if cfg.baselines {
        let spop = SPop::fit(&dataset.train_sessions, dataset.n_items());
        blocks.push(ReportBlock {
            name: "s-pop".to_string(),
            metrics: evaluate(
                |s| Ok(spop.score(&s.prefix)),
                &test_samples,
                &cfg.eval_ks,
            )?,
        });
        let iknn = IKnn::fit(&dataset.train_sessions, dataset.n_items(), cfg.iknn_neighbors);
        blocks.push(ReportBlock {
            name: "iknn".to_string(),
            metrics: evaluate(
                |s| Ok(iknn.score(&s.prefix)),
                &test_samples,
                &cfg.eval_ks,
            )?,
        });
    }

    let report = EvalReport {
        run_id: cfg.hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_echo: cfg.echo(),
        n_test_samples: test_samples.len(),
        blocks,
    };

    let path = cfg
        .report_path
        .clone()
        .unwrap_or_else(|| resolve_run_dir(cfg).join("report.json"));
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
    }
    fs::write(&path, serde_json::to_string_pretty(&report).unwrap())
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(report)
}

/// Parse an inline session like `itemA:view,itemB:cart` against the
/// dataset vocabularies.
pub fn parse_inline_session(text: &str, dataset: &Dataset) -> Result<Vec<Behavior>> {
    let mut behaviors = Vec::new();
    for (i, part) in text.split(',').enumerate() {
        let part = part.trim();
        let (item_token, label) = part
            .split_once(':')
            .ok_or_else(|| Error::data(format!("bad session entry `{part}` (want item:behavior)")))?;
        let item = dataset
            .item_vocab
            .get(item_token.trim())
            .ok_or_else(|| Error::data(format!("unknown item token `{}`", item_token.trim())))?;
        let btype = dataset
            .behavior_vocab
            .get(label.trim())
            .ok_or_else(|| Error::data(format!("unknown behavior label `{}`", label.trim())))?;
        behaviors.push(Behavior {
            item,
            btype,
            timestamp: i as i64,
        });
    }
    if behaviors.is_empty() {
        return Err(Error::data("inline session is empty".to_string()));
    }
    Ok(behaviors)
}

/// Recommendation output: ranked (token, probability) pairs plus the full
/// probability mass for the `--full` flag.
#[derive(Debug)]
pub struct Recommendation {
    pub items: Vec<(String, f64)>,
    pub total_mass: f64,
}

/// Score an inline session and return the top-k items.
pub fn cmd_recommend(
    cfg: &RunConfig,
    checkpoint: &Path,
    session: &str,
    k: usize,
) -> Result<Recommendation> {
    let dataset = artifact::load_artifact(&cfg.processed_dir)?;
    let (params, meta) = load_checkpoint(checkpoint)?;
    let vocab_checksum =
        artifact::vocab_checksum(&dataset.item_vocab, &dataset.behavior_vocab);
    if meta.vocab_checksum != vocab_checksum {
        return Err(Error::data(
            "checkpoint was trained against different vocabularies; refusing to recommend"
                .to_string(),
        ));
    }
    let behaviors = parse_inline_session(session, &dataset)?;
    let scores = predict(&params, &behaviors)?;
    let ranked = top_k(&scores, k);
    let items = ranked
        .items
        .iter()
        .map(|&i| {
            (
                dataset.item_vocab.token(i).unwrap_or("?").to_string(),
                scores.0[i],
            )
        })
        .collect();
    Ok(Recommendation {
        items,
        total_mass: scores.0.iter().sum(),
    })
}

/// Generate a synthetic event file in canonical CSV form.
pub fn cmd_synth(cfg: &RunConfig) -> Result<PathBuf> {
    let out = generate(&cfg.synth)?;
    let csv = to_canonical_csv(&out.events);
    if let Some(parent) = cfg.synth_out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
    }
    fs::write(&cfg.synth_out, csv)
        .map_err(|e| Error::io(cfg.synth_out.display().to_string(), e))?;
    Ok(cfg.synth_out.clone())
}

/// Convenience used by tests and examples: generate a synthetic dataset and
/// preprocess it into `processed_dir` in one go.
pub fn synth_and_preprocess(cfg: &RunConfig) -> Result<BTreeMap<String, String>> {
    cmd_synth(cfg)?;
    let mut pre = cfg.clone();
    pre.input = cfg.synth_out.display().to_string();
    pre.adapter = "canonical".to_string();
    cmd_preprocess(&pre)
}
