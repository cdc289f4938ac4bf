use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: only 2 and 3 are supported")]
    InvalidDimension(usize),
    #[error("degenerate extent on axis {axis}: {reason}")]
    DegenerateExtent { axis: usize, reason: String },
    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },
    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),
    #[error("non-positive mass weight {value} on cell {cell}")]
    NonPositiveWeight { cell: usize, value: f64 },
    #[error("length mismatch for {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("singular saddle-point system: {0}")]
    SingularSystem(String),
    #[error("conflicting constraints on face {face}: {first} vs {second}")]
    ConstraintConflict {
        face: usize,
        first: f64,
        second: f64,
    },
    #[error(
        "L-scheme did not converge within {iters} iterations (last increment {last_increment:e})"
    )]
    MaxItersExceeded { iters: usize, last_increment: f64 },
    #[error("missing coefficient metadata: {0}")]
    MissingMetadata(&'static str),
    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("snapshot missing for time step {0}")]
    MissingSnapshot(usize),
    #[error("at least 2 rows are needed to compute rates, got {0}")]
    InsufficientRows(usize),
    #[error("at least 3 iterations are needed in one step, got at most {0}")]
    TooFewIterations(usize),
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::IoFailure {
            path: path.display().to_string(),
            source,
        }
    }
}
