use thiserror::Error;

/// Errors raised by the linear algebra, form, state and channel layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("not Hermitian: |A[{row},{col}] - conj(A[{col},{row}])| = {deviation:e}")]
    NotHermitian { row: usize, col: usize, deviation: f64 },

    #[error("not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPsd { eigenvalue: f64 },

    #[error("spectral function undefined at eigenvalue {eigenvalue:e}")]
    Domain { eigenvalue: f64 },

    #[error("trace is not 1 (got {trace})")]
    InvalidTrace { trace: f64 },

    #[error("entry ({row},{col}) lies outside the block structure (magnitude {magnitude:e})")]
    OffBlock { row: usize, col: usize, magnitude: f64 },

    #[error("map is not unital (residual {residual:e})")]
    NotUnital { residual: f64 },

    #[error("map does not preserve adjoints (residual {residual:e})")]
    NotAdjointPreserving { residual: f64 },

    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("function is not homogeneous of degree {degree} (deviation {deviation:e} at ({x}, {y}))")]
    NotHomogeneous {
        degree: f64,
        deviation: f64,
        x: f64,
        y: f64,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
