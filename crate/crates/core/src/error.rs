use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("charge sector {what} has zero dimension")]
    EmptySector { what: String },

    #[error("dimension overflow: {0}")]
    Overflow(String),

    #[error("value {value} outside domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("symmetry mismatch: {0}")]
    Symmetry(String),

    #[error("layout mismatch: {0}")]
    Layout(String),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("sample {index}: {source}")]
    Sample {
        index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown {kind} `{name}`")]
    UnknownStrategy { kind: &'static str, name: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
