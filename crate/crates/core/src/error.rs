use thiserror::Error;

/// Errors produced anywhere in the surrogate pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("mass matrix is not invertible (condition number {condition:.3e})")]
    NonInvertibleMass { condition: f64 },

    #[error("resolvent (jωI - A) is singular at ω = {omega} rad/s")]
    SingularResolvent { omega: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),

    #[error("no resonance inside the frequency span [{lo}, {hi}] rad/s")]
    NoResonance { lo: f64, hi: f64 },

    #[error("grid too coarse: valley interval {index} between {lo} and {hi} rad/s holds {points} grid points (need at least 3)")]
    Resolution {
        index: usize,
        lo: f64,
        hi: f64,
        points: usize,
    },

    #[error("invalid knots: {0}")]
    InvalidKnots(String),

    #[error("value {value} outside the mapped span [{lo}, {hi}]")]
    Extrapolation { value: f64, lo: f64, hi: f64 },

    #[error("realization {realization} has {found} selected frequencies per channel, expected {expected} (mode count changed)")]
    ModeCount {
        realization: usize,
        expected: usize,
        found: usize,
    },

    #[error("regression matrix is rank deficient")]
    RegressionRank,

    #[error("fewer than 2 usable regressors")]
    DegenerateCandidates,

    #[error("input outside distribution support: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("insufficient experimental design: {found} points, need at least {required}")]
    InsufficientDesign { found: usize, required: usize },

    #[error("invalid prediction: {0}")]
    InvalidPrediction(String),

    #[error("reference vector has zero rms")]
    UndefinedReference,

    #[error("empty ensemble")]
    EmptyEnsemble,

    #[error("fit failed for {target}: {source}")]
    FitFailed {
        target: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Broad category used by front ends to choose an exit status.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::DimensionMismatch { .. } | Error::InvalidModel(_) => {
                ErrorKind::Config
            }
            Error::InvalidGrid(_) | Error::InsufficientDesign { .. } => ErrorKind::Config,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => ErrorKind::Io,
            Error::FitFailed { source, .. } => source.kind(),
            _ => ErrorKind::Numeric,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numeric,
    Io,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
