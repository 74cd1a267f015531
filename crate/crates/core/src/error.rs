use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("singular matrix: pivot {pivot:e} at column {column}")]
    Singular { column: usize, pivot: f64 },
    #[error("ill-conditioned matching system (rcond {rcond:e}) at M = {order}")]
    IllConditioned { order: usize, rcond: f64 },
    #[error("degenerate medium in region {0}: local energy at the Dirac point")]
    DegenerateMedium(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("truncation did not converge after {escalations} escalations (last change {change:e}, M = {order})")]
    NonConvergence { order: usize, escalations: usize, change: f64 },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("degenerate observable: {0}")]
    Degenerate(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
