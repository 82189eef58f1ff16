use thiserror::Error;

/// Errors raised anywhere in the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("leading coefficient matrix is singular (condition number {0:e})")]
    SingularLead(f64),

    #[error("invalid delay: {0}")]
    InvalidDelay(String),

    #[error("stencil needs at least 2 points, got {0}")]
    TooFewPoints(usize),

    #[error("invalid stencil: {0}")]
    InvalidStencil(String),

    #[error("step resolution: {0}")]
    StepResolution(String),

    #[error("window too short: {0}")]
    WindowTooShort(String),

    #[error("singular system matrix (smallest singular value {0:e})")]
    SingularSystem(f64),

    #[error("leading weight w_1 is zero")]
    LeadingWeightZero,

    #[error("lemma violation: {0}")]
    LemmaViolation(String),

    #[error("matrix is not symmetric (deviation {0:e})")]
    Asymmetric(f64),

    #[error("wrong case: {0}")]
    WrongCase(String),

    #[error("unbounded program: {0}")]
    Unbounded(String),

    #[error("singular implicit step at step {0}")]
    StepSingular(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error at `{field}`: {msg}")]
    Config { field: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            msg: msg.into(),
        }
    }
}
