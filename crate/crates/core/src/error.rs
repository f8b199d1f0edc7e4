use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    DimensionMismatch { expected: usize, found: usize },
    InvalidArgument(&'static str),
    Domain(&'static str),
    DegreeOverflow { degree: u32, max: u32 },
    NotPositiveDefinite,
    /// LU factorization of the level-`level` block reported a vanishing pivot.
    SingularBlock { level: u32 },
    EmptyEnsemble,
    DegenerateKernelRow { particle: usize },
    IntegrationDiverged { step: usize },
    SingularInnovation,
    LengthMismatch { left: usize, right: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::InvalidArgument(what) => write!(f, "invalid argument: {what}"),
            Error::Domain(what) => write!(f, "domain error: {what}"),
            Error::DegreeOverflow { degree, max } => {
                write!(f, "polynomial degree {degree} exceeds maximum {max}")
            }
            Error::NotPositiveDefinite => write!(f, "matrix is not symmetric positive definite"),
            Error::SingularBlock { level } => write!(f, "coefficient block A_{level} is singular"),
            Error::EmptyEnsemble => write!(f, "ensemble is empty"),
            Error::DegenerateKernelRow { particle } => {
                write!(f, "kernel row of particle {particle} vanished")
            }
            Error::IntegrationDiverged { step } => {
                write!(f, "integration produced a non-finite state at step {step}")
            }
            Error::SingularInnovation => write!(f, "innovation covariance is singular"),
            Error::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
        }
    }
}

impl core::error::Error for Error {}
