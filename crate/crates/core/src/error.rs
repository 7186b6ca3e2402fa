use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid interval: lo = {lo} > hi = {hi}")]
    InvalidInterval { lo: f64, hi: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite model output at t = {t}, x = {x:?}")]
    Evaluation { t: f64, x: Vec<f64> },

    #[error("simulation diverged at step {step}")]
    Divergence { step: usize },

    #[error("observation interval {delta} is not a multiple of step {h}")]
    GridMismatch { delta: f64, h: f64 },

    #[error("requested span exceeds trajectory: needs node {needed}, have {available}")]
    Range { needed: usize, available: usize },

    #[error("moment prediction diverged at substep {substep}")]
    PredictionDivergence { substep: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit status for the command-line front end: 1 usage or
    /// configuration, 2 I/O, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Csv(_) => 2,
            Error::Divergence { .. }
            | Error::Evaluation { .. }
            | Error::Domain(_)
            | Error::PredictionDivergence { .. }
            | Error::NotPositiveDefinite => 3,
            _ => 1,
        }
    }
}
