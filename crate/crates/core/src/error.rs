//! Error type shared by all modules of the crate.

use std::fmt;

/// Errors produced by construction and by the imaging/synthesis operations.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A type invariant was violated at construction time.
    InvalidInput(String),
    /// A scatterer coincides with an array element, making the 1/range
    /// factors of the forward model singular.
    CoincidentGeometry { scatterer: usize, element: String },
    /// Tensor/matrix dimensions of the operands do not agree.
    DimensionMismatch(String),
    /// The image is identically zero, so no peak normalization exists.
    FlatImage,
    /// An operation over a collection received no inputs.
    EmptyInput,
    /// The two images live on different grids.
    GridMismatch,
    /// The residual bound is smaller than the least-squares distance from
    /// the reference pattern to the range of the sensing matrix.
    Infeasible { min_residual_sq: f64, epsilon: f64 },
    /// Element selection removed every candidate.
    EmptySelection,
    /// A subset index exceeds the reference-scene size.
    SubsetOutOfRange { index: usize, len: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::CoincidentGeometry { scatterer, element } => write!(
                f,
                "scatterer {scatterer} coincides with element {element} (singular range)"
            ),
            Error::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
            Error::FlatImage => write!(f, "image is identically zero"),
            Error::EmptyInput => write!(f, "empty input"),
            Error::GridMismatch => write!(f, "image grids differ"),
            Error::Infeasible {
                min_residual_sq,
                epsilon,
            } => write!(
                f,
                "infeasible: least-squares residual {min_residual_sq:.3e} exceeds epsilon {epsilon:.3e}"
            ),
            Error::EmptySelection => write!(f, "no element survived selection"),
            Error::SubsetOutOfRange { index, len } => {
                write!(f, "subset index {index} out of range for {len} scatterers")
            }
        }
    }
}

impl std::error::Error for Error {}
