//! Command-line driver for adaptive surrogate-based inversion: run
//! configuration, the built-in groundwater case studies, run persistence
//! and posterior summaries. The numerics live in `surrogate-mcmc-core`.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod config;
pub mod runner;
pub mod scenario;
pub mod summary;

use serde_json::json;

/// Failures of a run, each with a stable machine-readable kind.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] surrogate_mcmc_core::Error),
    #[error("iteration {iteration}: {source}")]
    Iteration { iteration: usize, source: surrogate_mcmc_core::Error },
    #[error("bad artifact: {0}")]
    Artifact(String),
}

impl RunError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Invalid(_) => "invalid-config",
            Self::Parse(_) => "parse",
            Self::Io(_) => "io",
            Self::Model(_) => "model",
            Self::Iteration { .. } => "iteration",
            Self::Artifact(_) => "artifact",
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "error": self.kind(), "message": self.to_string() });
        match self {
            Self::Invalid(list) => v["violations"] = json!(list),
            Self::Iteration { iteration, .. } => v["iteration"] = json!(iteration),
            _ => {}
        }
        v
    }
}
