use thiserror::Error;

use crate::models::StateId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed state {state} for family {family}")]
    MalformedState { family: &'static str, state: String },

    #[error("resource limit: region would exceed the node cap of {cap} states")]
    ResourceLimit { cap: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid offspring law: {0}")]
    InvalidLaw(String),

    #[error("region is not irreducible: strongly connected component of size {size} containing {sample:?}")]
    Reducible { size: usize, sample: Vec<StateId> },

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("variant {variant} is not available for family {family}")]
    UnsupportedVariant { variant: String, family: &'static str },

    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),

    #[error("degenerate series: all coefficients vanish")]
    DegenerateSeries,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("hypothesis not satisfied: {0}")]
    Applicability(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },

    #[error("identifier mismatch: {0}")]
    IdMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
