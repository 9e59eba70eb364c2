//! Error taxonomy shared by the solver, config, and I/O layers.
//!
//! The CLI maps these onto exit codes: validation problems are user
//! errors (1), degeneracy and non-convergence are mathematical failures
//! of the model (2), and file problems are I/O errors (3).

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    /// A parameter or config value violates its declared constraint.
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    /// Config text failed to parse.
    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    /// The non-degeneracy condition 1 - 2k(theta)*p dropped below the floor.
    #[error("degeneracy: min(1 - 2k(theta)p) = {min_value:.6e} at node {location:?} (floor {floor:.3e})")]
    Degeneracy {
        min_value: f64,
        location: Vec<usize>,
        floor: f64,
    },

    /// Picard iteration exhausted max_iter without meeting the tolerance.
    #[error("fixed-point iteration did not converge: residual {residual:.6e} after {iterations} iterations")]
    NonConvergence { iterations: usize, residual: f64 },

    /// Inner linear (Krylov) solve stalled.
    #[error("linear solve failed: relative residual {residual:.6e} after {iterations} iterations")]
    LinearSolve { iterations: usize, residual: f64 },

    /// Mismatched grids or field shapes.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Filesystem failure, with the offending path.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A data file had the wrong layout or magic.
    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: PathBuf, reason: String },
}

impl SimError {
    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        SimError::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    /// Exit code class used by the CLI: 1 user/validation, 2 solver, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::InvalidParameter { .. } | SimError::ConfigParse { .. } => 1,
            SimError::Degeneracy { .. }
            | SimError::NonConvergence { .. }
            | SimError::LinearSolve { .. }
            | SimError::ShapeMismatch(_) => 2,
            SimError::Io { .. } | SimError::MalformedFile { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
