//! Command-line front end: reads a hand specification, searches thumb
//! bases, and writes the candidate table, the winner's report, optional
//! occupancy clouds and gesture poses.

// Negated comparisons are how validation rejects NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod document;
pub mod export;
pub mod gestures;
pub mod pipeline;

pub use document::HandSpecDocument;
pub use export::CloudFormat;
pub use pipeline::{run_pipeline, PipelineOptions, PipelineOutcome};

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "HANDFORGE_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Core(#[from] handforge_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for bad input, 3 when no candidate is feasible, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Core(handforge_core::Error::InvalidInput(_)) => 2,
            CliError::Core(handforge_core::Error::NoFeasibleCandidate { .. }) => 3,
            _ => 1,
        }
    }
}
