use std::fmt;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors emitted by tensor math, normalizers, and training.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Data length does not match the product of the extents.
    DataLength { expected: usize, got: usize },
    /// A shape had a zero extent or an otherwise unusable layout.
    InvalidShape { reason: String },
    /// Two operands cannot be combined under extent-1 broadcasting.
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    /// A value outside the operation's domain (sqrt of negative, divide by zero).
    Domain { op: &'static str, detail: String },
    /// A non-finite value was produced or supplied.
    NonFinite { context: String },
    /// An accumulation region is malformed or incompatible with the input rank.
    InvalidRegion { reason: String },
    /// Divisive step hit a zero denominator (sigma = 0 over an all-zero window).
    ZeroDenominator,
    /// Backward was started from a non-scalar node.
    NonScalarLoss { shape: Vec<usize> },
    /// A gradient check could not evaluate the function at a probe point.
    CheckFailed { coordinate: usize, detail: String },
    /// An argument violated a documented precondition.
    InvalidArgument { what: String },
    /// Normalizer state does not match the spec or upstream it is used with.
    SpecMismatch { reason: String },
    /// A class index outside [0, classes).
    TargetOutOfRange { target: usize, classes: usize },
    /// Gradient map and parameter set are keyed differently.
    KeyMismatch { key: String },
    /// A dataset file is absent.
    MissingFile { path: String },
    /// An IDX header carried an unexpected magic number.
    BadMagic { expected: u32, found: u32 },
    /// An IDX payload ended before the header-declared size.
    Truncated { expected: usize, got: usize },
    /// Wrapper around I/O failures while reading datasets.
    Io { message: String },
    /// Training aborted; carries the step at which the failure surfaced.
    TrainAbort { step: u64, source: Box<Error> },
    /// Extra location information attached to an inner error.
    Context { context: String, source: Box<Error> },
}

impl Error {
    /// Wraps the error with a location such as the layer it surfaced in.
    pub fn with_context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// True for failures of the numerics themselves (as opposed to bad
    /// configuration or I/O): non-finite values, domain violations, and
    /// zero denominators, possibly wrapped in context.
    pub fn is_numeric_abort(&self) -> bool {
        match self {
            Error::NonFinite { .. } | Error::Domain { .. } | Error::ZeroDenominator => true,
            Error::TrainAbort { source, .. } | Error::Context { source, .. } => {
                source.is_numeric_abort()
            }
            _ => false,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DataLength { expected, got } => {
                write!(f, "data length {got} does not match shape product {expected}")
            }
            Error::InvalidShape { reason } => write!(f, "invalid shape: {reason}"),
            Error::ShapeMismatch { op, lhs, rhs } => {
                write!(f, "{op}: shapes {lhs:?} and {rhs:?} are incompatible")
            }
            Error::Domain { op, detail } => write!(f, "{op}: {detail}"),
            Error::NonFinite { context } => write!(f, "non-finite value in {context}"),
            Error::InvalidRegion { reason } => write!(f, "invalid region: {reason}"),
            Error::ZeroDenominator => {
                write!(f, "zero denominator: sigma = 0 over an all-zero accumulation window")
            }
            Error::NonScalarLoss { shape } => {
                write!(f, "backward requires a scalar loss, got shape {shape:?}")
            }
            Error::CheckFailed { coordinate, detail } => {
                write!(f, "gradient check failed at coordinate {coordinate}: {detail}")
            }
            Error::InvalidArgument { what } => write!(f, "invalid argument: {what}"),
            Error::SpecMismatch { reason } => write!(f, "state/spec mismatch: {reason}"),
            Error::TargetOutOfRange { target, classes } => {
                write!(f, "target {target} out of range for {classes} classes")
            }
            Error::KeyMismatch { key } => write!(f, "gradient/parameter key mismatch: {key}"),
            Error::MissingFile { path } => write!(f, "missing file: {path}"),
            Error::BadMagic { expected, found } => {
                write!(f, "bad magic number: expected {expected}, found {found}")
            }
            Error::Truncated { expected, got } => {
                write!(f, "truncated payload: expected {expected} bytes, got {got}")
            }
            Error::Io { message } => write!(f, "io error: {message}"),
            Error::TrainAbort { step, source } => {
                write!(f, "training aborted at step {step}: {source}")
            }
            Error::Context { context, source } => write!(f, "{context}: {source}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::TrainAbort { source, .. } | Error::Context { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io {
            message: e.to_string(),
        }
    }
}
