use std::path::PathBuf;

/// Errors surfaced by the numerical pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("profile does not decay before r_max: |f(r_max)| = {value:e} exceeds tail tolerance {tolerance:e}")]
    Truncation { value: f64, tolerance: f64 },

    #[error("profile has no spectral view")]
    MissingSpectral,

    #[error("free propagation to |t| = {t} leaves mass {tail:e} (relative) within r_max - |t|")]
    Causality { t: f64, tail: f64 },

    #[error("need at least {required} samples, got {got}")]
    InsufficientSamples { required: usize, got: usize },

    #[error("only {got} samples exceed the threshold, need at least {required}")]
    InsufficientExceedances { required: usize, got: usize },

    #[error("last tenth of the tau range carries {fraction:e} of the norm (limit {limit:e})")]
    HorizonTruncation { fraction: f64, limit: f64 },

    #[error("time step {dt:e} exceeds the stability limit {limit:e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("unstable-mode coefficient did not settle to {tolerance:e} by tau = {tau}")]
    ProjectionNotConverged { tau: f64, tolerance: f64 },

    #[error("Picard iteration stopped contracting at iteration {iteration} (ratios {ratios:?})")]
    NonContraction { iteration: usize, ratios: Vec<f64> },

    #[error("Picard iterate left the ball: Z-norm {norm:e} > {limit:e}")]
    Divergence { norm: f64, limit: f64 },

    #[error("Picard iteration did not reach tolerance within {iterations} iterations")]
    PicardBudget { iterations: usize },

    #[error("forcing violates the smallness condition: {0}")]
    Smallness(String),

    #[error("no sign change on [{lo}, {hi}]: F(lo) = {f_lo:e}, F(hi) = {f_hi:e}")]
    BracketFailure { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("blowup-time fit rejected: {0}")]
    PoorFit(String),

    #[error("solver did not blow up before t = {t_final}")]
    NoBlowup { t_final: f64 },

    #[error("malformed input: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
