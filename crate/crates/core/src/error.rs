use thiserror::Error;

/// Errors raised by the covariance-matrix pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unphysical CM: minimum eigenvalue {min_eigenvalue:e}")]
    UnphysicalCm { min_eigenvalue: f64 },

    #[error("unphysical CM: matrix not symmetric (max asymmetry {asymmetry:e})")]
    NonSymmetric { asymmetry: f64 },

    #[error("covariance matrix must be 2n x 2n with n >= 1, got {rows} x {cols}")]
    BadShape { rows: usize, cols: usize },

    #[error("symplectic spectrum pairing failed: {first} vs {second}")]
    SpectrumPairing { first: f64, second: f64 },

    #[error("unphysical symplectic eigenvalue {0}")]
    UnphysicalSymplecticEigenvalue(f64),

    #[error("degenerate measurement variance {0}")]
    DegenerateMeasurement(f64),

    #[error("mode index {index} out of range for {modes} modes")]
    ModeOutOfRange { index: usize, modes: usize },

    #[error("empty spectrum")]
    EmptySpectrum,

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("negative squeezing r = {0}")]
    NegativeSqueezing(f64),

    #[error("invalid transmissivity T = {0}")]
    InvalidTransmissivity(f64),

    #[error("selection exceeds mode count: {selected} operations for {modes} supermodes")]
    SelectionExceedsModes { selected: usize, modes: usize },

    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("unphysical pipeline: {0}")]
    UnphysicalPipeline(String),

    #[error("insufficient truncation: cutoff {cutoff} < required {required}")]
    InsufficientTruncation { cutoff: usize, required: usize },

    #[error("invalid optimization problem: {0}")]
    InvalidProblem(String),
}

pub type Result<T> = std::result::Result<T, Error>;
