use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("response out of range at observation {index}: {reason}")]
    ResponseOutOfRange { index: usize, reason: String },

    #[error("random-effect block {0} has zero columns")]
    EmptyBlock(usize),

    #[error("model has no random-effect blocks")]
    NoRandomEffects,

    #[error("invalid hyperparameter in block {block}: {reason}")]
    InvalidHyperparameter { block: usize, reason: String },

    #[error("link {link} is not supported for family {family}")]
    UnsupportedLink { family: String, link: String },

    #[error("operation requires family {expected}, got {actual}")]
    WrongFamily { expected: String, actual: String },

    #[error("operation requires the log link for Poisson data")]
    WrongLink,

    #[error("operation requires {expected} priors on every block")]
    WrongPriorKind { expected: &'static str },

    #[error("all Poisson responses are zero; the pseudo-binomial reduction is undefined")]
    DegenerateAllZero,

    #[error("design matrix X is rank deficient (rank {rank} < {cols})")]
    RankDeficient { rank: usize, cols: usize },

    #[error("GLM maximum likelihood estimate does not exist (data are separated)")]
    Separation,

    #[error("approximate Jeffreys prior requires a canonical link")]
    NonCanonicalLink,

    #[error("tau must be strictly positive, got {0}")]
    NonpositiveTau(f64),

    #[error("outside the closed-form scope: {0}")]
    OutOfScope(String),

    #[error("problem exceeds desk-scale limits: {0}")]
    ScaleLimit(String),

    #[error("mode search for the random-effect integrand failed: {0}")]
    ModeSearchFailed(String),

    #[error("root bracketing failed: {0}")]
    RootBracket(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at {location}: {reason}")]
    Parse { location: String, reason: String },
}

impl Error {
    pub(crate) fn parse(location: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            reason: reason.into(),
        }
    }
}
