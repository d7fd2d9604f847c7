use thiserror::Error;

pub type Result<T> = std::result::Result<T, SsfError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SsfError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("spectral parameter z = 0 has no usable square-root branch")]
    Branch,

    #[error("integration failed near x = {x}: {reason}")]
    Integration { x: f64, reason: String },

    #[error("quadrature did not reach tolerance (estimate {value}, error {error})")]
    Accuracy { value: f64, error: f64 },

    #[error("z = {z_re}{z_im:+}i is within threshold of an eigenvalue ({what}, |W| = {magnitude:e})")]
    NearEigenvalue {
        z_re: f64,
        z_im: f64,
        what: &'static str,
        magnitude: f64,
    },

    #[error("tail tolerance {tol:e} not reachable: {reason}")]
    Tail { tol: f64, reason: String },

    #[error("ill-conditioned LU factorization (pivot ratio {ratio:e})")]
    Conditioning { ratio: f64 },

    #[error("phase jump between lambda = {lo} and {hi} not resolved after {depth} bisections")]
    GridRefinement { lo: f64, hi: f64, depth: u32 },

    #[error("sign-split grid has negative value {value} at lambda = {lambda}")]
    SignSplit { lambda: f64, value: f64 },

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("lambda = {lambda} lies within {radius} of the eigenvalue {eigenvalue}")]
    ExclusionZone {
        lambda: f64,
        eigenvalue: f64,
        radius: f64,
    },
}

impl SsfError {
    pub fn domain(msg: impl Into<String>) -> Self {
        SsfError::Domain(msg.into())
    }

    pub fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        SsfError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}
