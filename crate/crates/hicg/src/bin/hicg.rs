//! Thin command-line front end over the library pipeline.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data/IO error,
//! 4 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hicg::run::{cmd_evaluate, cmd_preprocess, cmd_recommend, cmd_synth, cmd_train_with, RunConfig};
use hicg::Error;

#[derive(Parser)]
#[command(name = "hicg", version, about = "Session-based recommendation over heterogeneous behavior graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Path to a key=value config file (supports `include = path`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Random seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Objective mode: `hicg` (no contrastive term) or `hicg-cl`.
    #[arg(long)]
    mode: Option<String>,
}

impl Common {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if let Some(seed) = self.seed {
            out.push(("seed".to_string(), seed.to_string()));
        }
        if let Some(mode) = &self.mode {
            out.push(("mode".to_string(), mode.clone()));
        }
        out
    }

    fn load(&self, extra: &[(String, String)]) -> Result<RunConfig, Error> {
        let mut overrides = self.overrides();
        overrides.extend(extra.iter().cloned());
        RunConfig::load(self.config.as_deref(), &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse, sessionize, filter, split and write the processed artifact.
    Preprocess {
        #[command(flatten)]
        common: Common,
    },
    /// Train on a processed artifact, checkpointing the best epoch.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a checkpoint on the test split (HR@K / MRR@K).
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Checkpoint to evaluate.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Also evaluate the S-POP and session-KNN reference rankers.
        #[arg(long)]
        baselines: bool,
    },
    /// Score an inline session and print the top-k items.
    Recommend {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Inline session: `itemA:view,itemB:cart,...`
        #[arg(long)]
        session: String,
        /// How many items to print.
        #[arg(long, short, default_value_t = 5)]
        k: usize,
        /// Also print the total probability mass over the full catalog.
        #[arg(long)]
        full: bool,
    },
    /// Generate a synthetic clickstream in canonical CSV form.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Output path override.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run() -> Result<(), Error> {
    match Cli::parse().command {
        Command::Preprocess { common } => {
            let cfg = common.load(&[])?;
            let manifest = cmd_preprocess(&cfg)?;
            for (k, v) in &manifest {
                println!("{k}={v}");
            }
            Ok(())
        }
        Command::Train { common } => {
            let cfg = common.load(&[])?;
            let outcome = cmd_train_with(&cfg, |record| {
                println!(
                    "{} val_hr5={:.4} val_hr20={:.4} val_mrr20={:.4}",
                    record.stats, record.val_hr5, record.val_hr20, record.val_mrr20
                );
            })?;
            println!(
                "best_epoch={} best_val_hr20={:.4} checkpoint={}",
                outcome.best_epoch,
                outcome.best_val_hr20,
                outcome.checkpoint_path.display()
            );
            Ok(())
        }
        Command::Evaluate {
            common,
            checkpoint,
            baselines,
        } => {
            let mut extra = Vec::new();
            if baselines {
                extra.push(("baselines".to_string(), "true".to_string()));
            }
            let cfg = common.load(&extra)?;
            let report = cmd_evaluate(&cfg, &checkpoint)?;
            for block in &report.blocks {
                for m in &block.metrics.per_k {
                    println!(
                        "{} hr@{}={:.4} mrr@{}={:.4}",
                        block.name, m.k, m.hr, m.k, m.mrr
                    );
                }
            }
            Ok(())
        }
        Command::Recommend {
            common,
            checkpoint,
            session,
            k,
            full,
        } => {
            let cfg = common.load(&[])?;
            let rec = cmd_recommend(&cfg, &checkpoint, &session, k)?;
            for (token, score) in &rec.items {
                println!("{token}\t{score:.6}");
            }
            if full {
                println!("total_mass={:.6}", rec.total_mass);
            }
            Ok(())
        }
        Command::Synth { common, out } => {
            let mut extra = Vec::new();
            if let Some(path) = out {
                extra.push(("synth_out".to_string(), path.display().to_string()));
            }
            let cfg = common.load(&extra)?;
            let path = cmd_synth(&cfg)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error {}", e.machine_readable());
            ExitCode::from(e.kind().exit_code() as u8)
        }
    }
}
