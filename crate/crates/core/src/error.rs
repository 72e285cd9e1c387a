use thiserror::Error;

/// Errors reported by the library.
#[derive(Debug, Error)]
pub enum JdError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("matrix is not unitary within tolerance {tol:e} (defect {defect:e})")]
    NotUnitary { defect: f64, tol: f64 },
    #[error("degenerate spectra: diagonal entries d_i, d_j coincide in every matrix (pair {i}, {j})")]
    DegenerateSpectra { i: usize, j: usize },
    #[error("determinant {det} is not 1 within tolerance {tol:e}")]
    DeterminantNotOne { det: String, tol: f64 },
    #[error("singular pivot structure: column {col} has no usable pivot within tolerance")]
    SingularPivot { col: usize },
    #[error("ambiguous alignment: remaining columns have no candidate above modulus threshold")]
    AmbiguousAlignment,
    #[error("non-finite entry at position ({i}, {j})")]
    NonFiniteEntry { i: usize, j: usize },
    #[error("empty factor list")]
    EmptyFactorList,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, JdError>;
