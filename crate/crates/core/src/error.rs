use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian: max |A - A^H| entry deviation {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("basis has {labels} labels but matrix dimension is {dim}")]
    BasisLength { labels: usize, dim: usize },

    #[error("invalid basis label: {0}")]
    BasisLabel(String),

    #[error("operators live on different bases (dims {left} and {right})")]
    BasisMismatch { left: usize, right: usize },

    #[error("not a density matrix: trace {trace}, min eigenvalue {min_eigenvalue:e}")]
    NotDensity { trace: f64, min_eigenvalue: f64 },

    #[error("eigen-solver did not converge (dim {dim}, max |entry| {scale:e})")]
    EigenFailure { dim: usize, scale: f64 },

    #[error("{name} = {value} is outside its domain: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("d*b = {product} must be < 0.5 for the low-noise state approximation")]
    ApproximationDomain { product: f64 },

    #[error("dimension {dim} exceeds the configured cap {cap}")]
    Capacity { dim: usize, cap: usize },

    #[error("signal amplitudes have length {len}, expected d = {d}")]
    SignalLength { len: usize, d: usize },

    #[error("signal amplitudes have norm {norm}, expected 1")]
    SignalNorm { norm: f64 },

    #[error("outcome model is degenerate (p_yes|absent = {p_absent}); use the first-photon strategy")]
    DegenerateModel { p_absent: f64 },

    #[error("q = {q} gives no finite trial count")]
    Unbounded { q: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            reason,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
