//! Benchmark datasets, option permutation, scoring, reports and sweeps.

mod bench;
mod dataset;
mod permute;
mod report;
mod score;
pub mod synthetic;

pub use bench::{
    compare_retrievers, run_bench, settings_matrix, AdapterSource, BenchConfig, BenchDeps, BenchRun, ModeKind,
    QuestionResult, RetrieverComparison, Setting, SharedAdapter,
};
pub use dataset::{derive_styles, load_dataset, parse_dataset, write_dataset, DatasetManifest, Question, Style};
pub use permute::{permute_options, PermutationSpec};
pub use report::{
    compute_deltas, compute_retriever_deltas, emit_report, parse_report_csv, parse_retrievers_csv, relative_delta,
    EvalReport, ReportFormat, ReportRow, RetrieverRow, REPORT_CSV, REPORT_JSON, RETRIEVERS_CSV,
};
pub use score::{
    is_correct, normalize_answer, ranking_metrics, retrieval_recall_at_k, score, Prediction, RetrievalMetrics,
    ScoreTable, ScoredQuestion,
};

use thiserror::Error;

use crate::retrieval::RetrievalError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dataset parse error: {0}")]
    Parse(String),
    #[error("question `{id}`: {reason}")]
    Schema { id: String, reason: String },
    #[error("question `{0}` has no options")]
    MissingOptions(String),
    #[error("question `{0}` has no gold answer")]
    MissingGold(String),
    #[error("question `{0}` is open-ended and has no options to permute")]
    StyleError(String),
    #[error("prediction for unknown question `{0}`")]
    UnknownQuestionId(String),
    #[error("session for question `{0}` has no retrieval steps")]
    NoRetrievalSteps(String),
    #[error("invalid permutation `{0}`")]
    InvalidPermutation(String),
    #[error("no settings to run")]
    EmptySettings,
    #[error("report has no rows")]
    EmptyReport,
    #[error("bench config: {0}")]
    Config(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
