//! Run configuration and the command layer behind the `hicg` binary.

pub mod commands;
pub mod config;

pub use commands::{
    cmd_evaluate, cmd_preprocess, cmd_recommend, cmd_synth, cmd_train, cmd_train_with,
    synth_and_preprocess, EpochRecord, EvalReport, Recommendation, TrainOutcome,
};
pub use config::{Mode, RunConfig, ENV_PREFIX};
