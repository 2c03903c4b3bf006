//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("invalid link: {0}")]
    InvalidLink(String),

    #[error("invalid motion: {0}")]
    InvalidMotion(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("evaluation point is on or too close to a curve (distance {dist:.3e})")]
    SingularPoint { dist: f64 },

    #[error("quadrature did not converge: {0}")]
    NotConverged(String),

    #[error("linking number did not round to an integer: raw {raw}, residual {residual:.3e}")]
    NonIntegerLinking { raw: f64, residual: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("field-line trace failed: {0}")]
    Trace(String),

    #[error("field construction: {0}")]
    Field(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
