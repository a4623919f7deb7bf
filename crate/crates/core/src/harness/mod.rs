//! Experiment harness: configuration, cached pipeline stages, reports,
//! the TF-IDF + logistic regression baseline, sweeps and embedding export.

mod baseline;
mod config;
mod export;
mod pipeline;
mod report;
mod sweep;

use std::path::PathBuf;

use thiserror::Error;

pub use baseline::{baseline_tfidf_lr, run_baseline, tfidf_features};
pub use config::{
    find_preset, BaselineConfig, CorpusSection, EmbedSection, ExperimentConfig, ModelSection, Precision, Preset, RunSection, PRESETS,
};
pub use export::{export_embeddings, read_export, ExportLayer, ExportRow};
pub use pipeline::{
    evaluate_model, fingerprint, load_corpus_stage, run_pipeline, run_repeats, run_until, targets_from_splits, RepeatSummary, Stage,
    StageSummary,
};
pub use report::{accuracy, class_metrics, confusion_matrix, ClassMetrics, HistorySummary, RunReport};
pub use sweep::{run_sweep, sweep_table, SweepEntry, SweepGrid};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{stage} stage failed: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("no checkpoint at {0}; run `train` first")]
    MissingCheckpoint(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub(crate) fn stage(stage: &'static str, err: impl std::fmt::Display) -> Self {
        HarnessError::Stage { stage, message: err.to_string() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }
}
