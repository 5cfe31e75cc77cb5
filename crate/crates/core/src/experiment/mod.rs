//! Config-driven runs: dataset generation, training, evaluation and the ablation study.
//!
//! Outputs go to a run directory named by the config hash; file names carry the seed and the
//! hash. Every report byte is a function of the config alone.

mod ablate;
mod commands;
mod config;
mod pipeline;

pub use ablate::{
    ablate, acceptance_checks, drift_histograms, AblationOutcome, ModelSpec, BASELINE, CORR_CLS, CORR_FORESIGHT,
    CORR_HINDSIGHT_DECOUPLED, CORR_HINDSIGHT_DIRECT, MODELS, TABLE_FEATURES, TABLE_FUSION, TABLE_METHODS,
};
pub use commands::{
    evaluate, evaluate_params, gen_data, load_checkpoint, train, write_report, EvaluateOutcome, GenDataSummary,
    ReportFiles, TrainOutcome,
};
pub use config::ExperimentConfig;
pub use pipeline::{infer, raw_detections, score, EvalSplit};
