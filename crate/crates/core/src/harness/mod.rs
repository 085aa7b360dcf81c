//! Config-driven pipeline: synth, train, score, evaluate, sweep.
//!
//! Every command is a pure function of its [`ExperimentConfig`]; rerunning
//! with the same config rewrites byte-identical files.

mod commands;
mod config;
mod scores;

pub use commands::{
    cell_config, check_training_purity, cmd_evaluate, cmd_score, cmd_sweep, cmd_synth, cmd_train, EvaluateSummary,
    ScoreSummary, SweepCell, SweepSummary, SynthSummary, TrainSummary, MODEL_FILE, REPORT_DIR, RESOLVED_CONFIG,
    SCORES_FILE, SWEEP_DIR, TRAIN_LOG,
};
pub use config::{
    DataConfig, DataFiles, DataSource, ExperimentConfig, GmmConfig, ModelConfig, Overrides, PreprocessingConfig,
    SvmConfig, SweepConfig, VaeConfig,
};
pub use scores::{read_scores, score_set, write_scores, ScoredPair, SCORES_HEADER};
