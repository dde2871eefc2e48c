use thiserror::Error;

/// Broad failure classes. The CLI maps these onto exit codes and the C API
/// onto status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed input: bad arguments, shape mismatches, unparsable config.
    Input,
    /// A mathematical hypothesis of the model is violated (no spectral gap,
    /// coupling outside the admissible range, Hardy in low dimension).
    Hypothesis,
    /// An algorithm failed to deliver (iteration caps, singular systems).
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("field and operator live on different boxes")]
    DomainMismatch,

    #[error("no spectral gap at 0: {0}")]
    NoSpectralGap(String),

    #[error("zero eigenvalue {0:e}: the spectral splitting is undefined")]
    ZeroEigenvalue(f64),

    #[error("{sites} sites exceed the dense eigensolver budget of {budget}")]
    TooLarge { sites: usize, budget: usize },

    #[error("spectral gap not certified: {0}")]
    GapNotCertified(String),

    #[error("nonlinearity hypotheses fail: {0}")]
    HypothesisFailed(String),

    #[error("Hardy requires N ≥ 3 (got N = {0})")]
    HardyDimension(usize),

    #[error("rho = {rho} is outside the admissible range [0, {limit}]")]
    RhoOutOfRange { rho: f64, limit: f64 },

    #[error("field is not in the positive spectral subspace (residual {0:e})")]
    NotInPositiveSubspace(f64),

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("{stage}: iteration cap of {cap} reached (residual {residual:e})")]
    IterationCap {
        stage: &'static str,
        cap: usize,
        residual: f64,
    },

    #[error("numerically singular {what}: {detail}")]
    Singular { what: &'static str, detail: String },

    #[error("newton polishing diverged: residual grew for {0} consecutive damped steps")]
    Divergence(usize),

    #[error("not a Nehari point: {0}")]
    NotNehari(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidInput(_)
            | Error::DimensionMismatch { .. }
            | Error::DomainMismatch
            | Error::TooLarge { .. }
            | Error::NotInPositiveSubspace(_)
            | Error::Config(_)
            | Error::Parse { .. } => ErrorClass::Input,
            Error::NoSpectralGap(_)
            | Error::ZeroEigenvalue(_)
            | Error::HardyDimension(_)
            | Error::GapNotCertified(_)
            | Error::HypothesisFailed(_)
            | Error::RhoOutOfRange { .. } => ErrorClass::Hypothesis,
            Error::Degenerate(_)
            | Error::IterationCap { .. }
            | Error::Singular { .. }
            | Error::Divergence(_)
            | Error::NotNehari(_)
            | Error::Numerical(_) => ErrorClass::Numerical,
            Error::Io(_) => ErrorClass::Io,
        }
    }
}

impl ErrorClass {
    /// Process exit status for this class.
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Input | ErrorClass::Hypothesis => 2,
            ErrorClass::Numerical | ErrorClass::Io => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
