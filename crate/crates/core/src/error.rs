use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("division by zero in GF(2^{w})")]
    DivisionByZero { w: u8 },

    #[error("unsupported field width w={0}")]
    UnsupportedWidth(u8),

    #[error("polynomial {poly:#x} is not irreducible of degree {w}")]
    ReduciblePolynomial { w: u8, poly: u32 },

    #[error("element {value:#x} out of range for GF(2^{w})")]
    ElementOutOfRange { w: u8, value: u32 },

    #[error("matrix dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("invalid code parameters: {0}")]
    InvalidParams(String),

    #[error("no valid partitioning for systematic node d{node} (run={run}, step={step})")]
    NoValidPartition { node: usize, run: usize, step: usize },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("no MDS coefficient table found after {attempts} draws")]
    MdsSearchExhausted { attempts: u32 },

    #[error("linear system for nodes {nodes:?} is singular")]
    SingularSystem { nodes: Vec<usize> },

    #[error("expected {expected} node shards, got {got}")]
    WrongNodeCount { expected: usize, got: usize },

    #[error("node {0} is not a valid node of this code")]
    UnknownNode(usize),

    #[error("repair of d{node}: symbol a({row},{unknown_node}) has no single-unknown equation")]
    UnsolvableSchedule { node: usize, row: usize, unknown_node: usize },

    #[error("repair input is missing symbol {0}")]
    MissingSymbol(String),

    #[error("repair of d{node}: gamma {gamma} outside [{lower}, {upper}]")]
    BoundViolation { node: usize, gamma: String, lower: String, upper: String },

    #[error("stripe shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, err: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), message: err.to_string() }
    }
}
