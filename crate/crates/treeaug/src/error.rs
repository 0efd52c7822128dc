use thiserror::Error;

use crate::instance::NodeId;

/// Library-wide error type. CLI exit codes are derived from the variant:
/// malformed input is a usage error, `Infeasible` is its own failure class,
/// and `Assertion` signals an internal invariant violation (a bug).
#[derive(Debug, Error)]
pub enum TapError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("infeasible instance: tree edge ({u}, {v}) is covered by no link")]
    Infeasible { u: NodeId, v: NodeId },

    #[error("not a cover: tree edge ({u}, {v}) is uncovered")]
    Uncovered { u: NodeId, v: NodeId },

    #[error("cover contains ({u}, {v}) which is not an input link")]
    NotAnInputLink { u: NodeId, v: NodeId },

    #[error("internal invariant violated: {0}")]
    Assertion(String),

    #[error("no feasible instance generated after {attempts} attempts (n={n}, density={density})")]
    GenerationFailed {
        n: usize,
        density: f64,
        attempts: usize,
    },

    #[error("exact search budget exceeded: optimum lies in [{lower}, {upper}]")]
    ExactBudget { lower: usize, upper: usize },
}

/// Shorthand used by solver internals for invariant checks that are supposed
/// to be unreachable on correct input.
pub fn assert_inv(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TapError> {
    if cond {
        Ok(())
    } else {
        Err(TapError::Assertion(msg()))
    }
}
