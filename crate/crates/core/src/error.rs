//! Crate error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("quadrature did not converge: residual {residual:.3e} (tolerance {tol:.3e})")]
    QuadratureNotConverged { residual: f64, tol: f64 },

    #[error("alpha-integral tail bound {bound:.3e} exceeds {tol:.3e}; widen the window")]
    TailBound { bound: f64, tol: f64 },

    #[error("Born series diverging at lambda0 = {lambda0}: consecutive term ratios {ratios:?}")]
    BornDivergence { lambda0: f64, ratios: [f64; 3] },

    #[error("eta extrapolation residuals not monotone ({residuals:?}); refine the eta ladder")]
    EtaExtrapolation { residuals: Vec<f64> },

    #[error("grid error: {0}")]
    Grid(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("NaN detected during evolution at step {step}")]
    EvolutionNan { step: usize },

    #[error("history enumeration too large: {count} histories (limit {limit})")]
    HistoryBlowup { count: usize, limit: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
