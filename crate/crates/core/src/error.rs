use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("recurrent network: killing is identically zero and there is no absorbing boundary")]
    Recurrent,

    #[error("unknown edge ({0}, {1})")]
    UnknownEdge(usize, usize),

    #[error("vertex {vertex} out of range (network has {count} vertices)")]
    VertexOutOfRange { vertex: usize, count: usize },

    #[error("energy form is not positive definite (smallest pivot {pivot:e}, threshold {threshold:e})")]
    NotPositiveDefinite { pivot: f64, threshold: f64 },

    #[error("edge point r = {r} outside [0, {length}] on edge {edge}")]
    EdgePointOutOfRange { edge: usize, r: f64, length: f64 },

    #[error("loop length truncation failed: spectral radius {0} is not below 1")]
    Truncation(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge: estimate {estimate}, error {error:e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
