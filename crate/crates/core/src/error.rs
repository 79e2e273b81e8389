use core::fmt;

/// Errors produced by the recalibration core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A probability or outcome fell outside its domain.
    Domain { what: &'static str, value: f64 },
    /// A structural parameter (grid size, bucket count, ...) is invalid.
    InvalidParameter(&'static str),
    /// Predict and update calls were interleaved in the wrong order.
    ProtocolOrder(&'static str),
    /// A query needs at least one recorded step.
    Empty,
    /// Feature vector length does not match the model.
    DimensionMismatch { expected: usize, got: usize },
    /// The stationary-distribution solver did not reach its tolerance.
    NumericFailure { residual: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { what, value } => write!(f, "{what} out of domain: {value}"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::ProtocolOrder(msg) => write!(f, "protocol order violated: {msg}"),
            Error::Empty => f.write_str("no steps recorded"),
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::NumericFailure { residual } => {
                write!(f, "fixed point did not converge (residual {residual:e})")
            }
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn check_probability(what: &'static str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain { what, value: p })
    }
}

pub(crate) fn check_outcome(y: u8) -> Result<()> {
    if y <= 1 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "outcome",
            value: f64::from(y),
        })
    }
}
