use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("division by zero in the field")]
    DivisionByZero,
    #[error("duplicate interpolation node")]
    DuplicateNode,
    #[error("no bounded fraction reconstructs this residue")]
    ReconstructFailed,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("evaluation domain error: {0}")]
    Domain(String),
    #[error("share shape mismatch: {0}")]
    Shape(String),
    #[error("insufficient redundancy: need {needed} consistent evaluations, have {available}")]
    InsufficientRedundancy { needed: usize, available: usize },
    #[error("no codeword within the decoding radius")]
    DecodeFailure,
    #[error("model update is the zero vector")]
    ZeroUpdate,
    #[error("value out of range: {0}")]
    Range(String),
    #[error("lifted magnitude exceeds the wrap-around guard")]
    WrapAroundDetected,
    #[error("infeasible parameters: {0}")]
    ParamsInfeasible(String),
    #[error("least-squares system is singular")]
    IllConditioned,
    #[error("sum of trust scores too close to zero")]
    LowTrustDenominator,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("malformed message: {0}")]
    Wire(String),
    #[error("non-finite gradient: {0}")]
    NonFinite(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("round {round} aborted in {phase}: {source}")]
    Aborted {
        round: u64,
        phase: String,
        #[source]
        source: Box<Error>,
    },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
