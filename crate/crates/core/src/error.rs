use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("grid needs at least 3 nodes per axis and positive extents (nx={nx}, ny={ny})")]
    BadGrid { nx: usize, ny: usize },

    #[error("external field vanishes at node {node} (i={i}, j={j})")]
    ZeroField { node: usize, i: usize, j: usize },

    #[error("time step {dt:e} exceeds the explicit stability bound {bound:e}")]
    Stability { dt: f64, bound: f64 },

    #[error("non-finite state at step {step}")]
    Blowup { step: usize },

    #[error("parameter outside admissible domain: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("linear solve failed at step {step}: {msg}")]
    Solve { step: usize, msg: String },

    #[error("parse error in {what}: {msg}")]
    Parse { what: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn same_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Shape { expected, found })
    }
}
