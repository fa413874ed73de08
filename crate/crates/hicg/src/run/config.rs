//! Flat key=value run configuration with file includes, environment
//! overrides (`HICG_*`) and a canonical echo that re-parses to an equal
//! config.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::{Fraction, SessionizeMode};
use crate::synth::SynthSpec;
use crate::train::HyperParams;

pub const ENV_PREFIX: &str = "HICG_";

/// Mode of the joint objective: `hicg` disables the contrastive term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Hicg,
    HicgCl,
}

impl Mode {
    pub fn parse(text: &str) -> Result<Mode> {
        match text {
            "hicg" => Ok(Mode::Hicg),
            "hicg-cl" => Ok(Mode::HicgCl),
            other => Err(Error::config(format!("unknown mode `{other}` (want hicg or hicg-cl)"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Hicg => "hicg",
            Mode::HicgCl => "hicg-cl",
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    // paths
    pub input: String,
    pub adapter: String,
    pub processed_dir: PathBuf,
    pub run_root: PathBuf,
    pub run_dir: Option<PathBuf>,
    pub report_path: Option<PathBuf>,
    // ingest
    pub behaviors: Vec<String>,
    pub target_behavior: String,
    pub collapse_types: bool,
    pub sessionize_by: String, // "key" | "gap"
    pub gap_minutes: i64,
    pub min_session_len: usize,
    pub min_item_freq: usize,
    pub test_window_days: f64,
    pub fraction: Fraction,
    pub restrict_to_target: bool,
    pub strict_parse: bool,
    // model / training
    pub mode: Mode,
    pub hyper: HyperParams,
    // evaluation
    pub eval_ks: Vec<usize>,
    pub iknn_neighbors: usize,
    pub baselines: bool,
    pub patience: usize,
    pub stop_at_val_hr5: f64,
    // synthetic generation
    pub synth: SynthSpec,
    pub synth_out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: String::new(),
            adapter: "canonical".to_string(),
            processed_dir: PathBuf::from("processed"),
            run_root: PathBuf::from("runs"),
            run_dir: None,
            report_path: None,
            behaviors: vec!["view".to_string(), "cart".to_string()],
            target_behavior: "view".to_string(),
            collapse_types: false,
            sessionize_by: "key".to_string(),
            gap_minutes: 30,
            min_session_len: 2,
            min_item_freq: 5,
            test_window_days: 1.0,
            fraction: Fraction::one(),
            restrict_to_target: true,
            strict_parse: false,
            mode: Mode::HicgCl,
            hyper: HyperParams::default(),
            eval_ks: vec![5, 20],
            iknn_neighbors: 500,
            baselines: false,
            patience: 0,
            stop_at_val_hr5: 0.0,
            // The generator seed tracks the run seed.
            synth: SynthSpec {
                seed: 0,
                ..SynthSpec::default()
            },
            synth_out: PathBuf::from("synthetic.csv"),
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "input",
    "adapter",
    "processed_dir",
    "run_root",
    "run_dir",
    "report_path",
    "behaviors",
    "target_behavior",
    "collapse_types",
    "sessionize_by",
    "gap_minutes",
    "min_session_len",
    "min_item_freq",
    "test_window_days",
    "fraction",
    "restrict_to_target",
    "strict_parse",
    "mode",
    "d",
    "dropout",
    "batch_size",
    "learning_rate",
    "l2",
    "lambda_cl",
    "beta",
    "temperature",
    "ggnn_steps",
    "epochs",
    "seed",
    "eval_ks",
    "iknn_neighbors",
    "baselines",
    "patience",
    "stop_at_val_hr5",
    "synth_items",
    "synth_types",
    "synth_sessions",
    "synth_len_min",
    "synth_len_max",
    "synth_noise",
    "synth_offtarget_noise",
    "synth_p_target",
    "synth_clusters",
    "synth_out",
];

/// Read raw pairs from a file, honoring `include = path` lines immediately
/// (relative to the including file).
fn read_pairs(path: &Path, out: &mut Vec<(String, String)>) -> Result<()> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: lineno + 1,
            message: format!("expected key=value in {}, got `{line}`", path.display()),
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key == "include" {
            let target = path.parent().unwrap_or(Path::new(".")).join(&value);
            read_pairs(&target, out)?;
        } else {
            out.push((key, value));
        }
    }
    Ok(())
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::config(format!("bad boolean for {key}: `{other}`"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::config(format!("bad value for {key}: `{v}`")))
}

impl RunConfig {
    /// Load from an optional file, then apply `HICG_*` environment
    /// overrides, then explicit overrides (highest precedence).
    pub fn load(
        file: Option<&Path>,
        overrides: &[(String, String)],
    ) -> Result<RunConfig> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        if let Some(path) = file {
            read_pairs(path, &mut pairs)?;
        }
        for (key, value) in std::env::vars() {
            if let Some(stripped) = key.strip_prefix(ENV_PREFIX) {
                pairs.push((stripped.to_lowercase(), value));
            }
        }
        pairs.extend(overrides.iter().cloned());
        Self::from_pairs(&pairs)
    }

    pub fn from_pairs(pairs: &[(String, String)]) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (key, value) in pairs {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::config(format!("unknown config key `{key}`")));
            }
            let v = value.as_str();
            match key.as_str() {
                "input" => cfg.input = v.to_string(),
                "adapter" => cfg.adapter = v.to_string(),
                "processed_dir" => cfg.processed_dir = PathBuf::from(v),
                "run_root" => cfg.run_root = PathBuf::from(v),
                "run_dir" => cfg.run_dir = Some(PathBuf::from(v)),
                "report_path" => cfg.report_path = Some(PathBuf::from(v)),
                "behaviors" => {
                    cfg.behaviors = v.split(',').map(|s| s.trim().to_string()).collect()
                }
                "target_behavior" => cfg.target_behavior = v.to_string(),
                "collapse_types" => cfg.collapse_types = parse_bool(key, v)?,
                "sessionize_by" => {
                    if v != "key" && v != "gap" {
                        return Err(Error::config(format!(
                            "sessionize_by must be `key` or `gap`, got `{v}`"
                        )));
                    }
                    cfg.sessionize_by = v.to_string();
                }
                "gap_minutes" => cfg.gap_minutes = parse_num(key, v)?,
                "min_session_len" => cfg.min_session_len = parse_num(key, v)?,
                "min_item_freq" => cfg.min_item_freq = parse_num(key, v)?,
                "test_window_days" => cfg.test_window_days = parse_num(key, v)?,
                "fraction" => cfg.fraction = Fraction::parse(v)?,
                "restrict_to_target" => cfg.restrict_to_target = parse_bool(key, v)?,
                "strict_parse" => cfg.strict_parse = parse_bool(key, v)?,
                "mode" => cfg.mode = Mode::parse(v)?,
                "d" => cfg.hyper.d = parse_num(key, v)?,
                "dropout" => cfg.hyper.dropout = parse_num(key, v)?,
                "batch_size" => cfg.hyper.batch_size = parse_num(key, v)?,
                "learning_rate" => cfg.hyper.learning_rate = parse_num(key, v)?,
                "l2" => cfg.hyper.l2 = parse_num(key, v)?,
                "lambda_cl" => cfg.hyper.lambda_cl = parse_num(key, v)?,
                "beta" => cfg.hyper.beta = parse_num(key, v)?,
                "temperature" => cfg.hyper.temperature = parse_num(key, v)?,
                "ggnn_steps" => cfg.hyper.ggnn_steps = parse_num(key, v)?,
                "epochs" => cfg.hyper.epochs = parse_num(key, v)?,
                "seed" => {
                    cfg.hyper.seed = parse_num(key, v)?;
                    cfg.synth.seed = cfg.hyper.seed;
                }
                "eval_ks" => {
                    cfg.eval_ks = v
                        .split(',')
                        .map(|s| parse_num("eval_ks", s.trim()))
                        .collect::<Result<_>>()?
                }
                "iknn_neighbors" => cfg.iknn_neighbors = parse_num(key, v)?,
                "baselines" => cfg.baselines = parse_bool(key, v)?,
                "patience" => cfg.patience = parse_num(key, v)?,
                "stop_at_val_hr5" => cfg.stop_at_val_hr5 = parse_num(key, v)?,
                "synth_items" => cfg.synth.n_items = parse_num(key, v)?,
                "synth_types" => cfg.synth.n_types = parse_num(key, v)?,
                "synth_sessions" => cfg.synth.n_sessions = parse_num(key, v)?,
                "synth_len_min" => cfg.synth.len_min = parse_num(key, v)?,
                "synth_len_max" => cfg.synth.len_max = parse_num(key, v)?,
                "synth_noise" => cfg.synth.noise = parse_num(key, v)?,
                "synth_offtarget_noise" => cfg.synth.offtarget_noise = parse_num(key, v)?,
                "synth_p_target" => cfg.synth.p_target = parse_num(key, v)?,
                "synth_clusters" => cfg.synth.clusters = parse_num(key, v)?,
                "synth_out" => cfg.synth_out = PathBuf::from(v),
                _ => unreachable!("key checked against KNOWN_KEYS"),
            }
        }
        cfg.finalize()?;
        Ok(cfg)
    }

    fn finalize(&mut self) -> Result<()> {
        // Plain mode runs without the contrastive term, whatever the file
        // said.
        if self.mode == Mode::Hicg {
            self.hyper.lambda_cl = 0.0;
        }
        if !self.behaviors.contains(&self.target_behavior) {
            return Err(Error::config(format!(
                "target behavior `{}` not among declared behaviors {:?}",
                self.target_behavior, self.behaviors
            )));
        }
        if self.eval_ks.is_empty() {
            return Err(Error::config("eval_ks must not be empty".to_string()));
        }
        self.hyper.validate()?;
        Ok(())
    }

    pub fn sessionize_mode(&self) -> SessionizeMode {
        if self.sessionize_by == "gap" {
            SessionizeMode::ByGap {
                gap_ms: self.gap_minutes * 60_000,
            }
        } else {
            SessionizeMode::ByKey
        }
    }

    pub fn test_window_ms(&self) -> i64 {
        (self.test_window_days * 86_400_000.0).round() as i64
    }

    /// Canonical echo: every effective setting, sorted, one `key = value`
    /// per line. Re-parsing the echo yields an equal config.
    pub fn echo(&self) -> String {
        let mut rows: BTreeMap<&str, String> = BTreeMap::new();
        rows.insert("input", self.input.clone());
        rows.insert("adapter", self.adapter.clone());
        rows.insert("processed_dir", self.processed_dir.display().to_string());
        rows.insert("run_root", self.run_root.display().to_string());
        if let Some(d) = &self.run_dir {
            rows.insert("run_dir", d.display().to_string());
        }
        if let Some(p) = &self.report_path {
            rows.insert("report_path", p.display().to_string());
        }
        rows.insert("behaviors", self.behaviors.join(","));
        rows.insert("target_behavior", self.target_behavior.clone());
        rows.insert("collapse_types", self.collapse_types.to_string());
        rows.insert("sessionize_by", self.sessionize_by.clone());
        rows.insert("gap_minutes", self.gap_minutes.to_string());
        rows.insert("min_session_len", self.min_session_len.to_string());
        rows.insert("min_item_freq", self.min_item_freq.to_string());
        rows.insert("test_window_days", self.test_window_days.to_string());
        rows.insert("fraction", self.fraction.to_string());
        rows.insert("restrict_to_target", self.restrict_to_target.to_string());
        rows.insert("strict_parse", self.strict_parse.to_string());
        rows.insert("mode", self.mode.as_str().to_string());
        rows.insert("d", self.hyper.d.to_string());
        rows.insert("dropout", self.hyper.dropout.to_string());
        rows.insert("batch_size", self.hyper.batch_size.to_string());
        rows.insert("learning_rate", self.hyper.learning_rate.to_string());
        rows.insert("l2", self.hyper.l2.to_string());
        rows.insert("lambda_cl", self.hyper.lambda_cl.to_string());
        rows.insert("beta", self.hyper.beta.to_string());
        rows.insert("temperature", self.hyper.temperature.to_string());
        rows.insert("ggnn_steps", self.hyper.ggnn_steps.to_string());
        rows.insert("epochs", self.hyper.epochs.to_string());
        rows.insert("seed", self.hyper.seed.to_string());
        rows.insert(
            "eval_ks",
            self.eval_ks
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        rows.insert("iknn_neighbors", self.iknn_neighbors.to_string());
        rows.insert("baselines", self.baselines.to_string());
        rows.insert("patience", self.patience.to_string());
        rows.insert("stop_at_val_hr5", self.stop_at_val_hr5.to_string());
        rows.insert("synth_items", self.synth.n_items.to_string());
        rows.insert("synth_types", self.synth.n_types.to_string());
        rows.insert("synth_sessions", self.synth.n_sessions.to_string());
        rows.insert("synth_len_min", self.synth.len_min.to_string());
        rows.insert("synth_len_max", self.synth.len_max.to_string());
        rows.insert("synth_noise", self.synth.noise.to_string());
        rows.insert(
            "synth_offtarget_noise",
            self.synth.offtarget_noise.to_string(),
        );
        rows.insert("synth_p_target", self.synth.p_target.to_string());
        rows.insert("synth_clusters", self.synth.clusters.to_string());
        rows.insert("synth_out", self.synth_out.display().to_string());

        let mut out = String::new();
        for (k, v) in rows {
            writeln!(out, "{k} = {v}").unwrap();
        }
        out
    }

    /// First 8 hex chars of the sha256 of the echo.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.echo().as_bytes());
        hex::encode(hasher.finalize())[..8].to_string()
    }
}

/// Parse echo-format text back into pairs (used for round-trip checks).
pub fn pairs_from_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: lineno + 1,
            message: format!("expected key=value, got `{line}`"),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}
