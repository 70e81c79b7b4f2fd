use thiserror::Error;

/// Errors shared by the matrix core and the Newton-type solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left}x{left} vs {right}x{right}")]
    DimensionMismatch { left: usize, right: usize },

    /// A non-finite value (NaN or infinity) appeared in `context`.
    #[error("non-finite value produced in {context}")]
    NonFinite { context: &'static str },

    /// Two diagonal entries are too close relative to the working precision
    /// for the linearized solve to be meaningful.
    #[error("spectrum collision: relative gap {gap:e} between slots {i} and {j} is below 2^-{prec}/2")]
    SpectrumCollision { i: usize, j: usize, gap: f64, prec: u32 },

    /// A 2x2 spectral determinant of the two-matrix system is too close to
    /// zero relative to the working precision.
    #[error("determinant collapse: relative |det| {det:e} for slots {i} and {j} is below 2^-{prec}/2")]
    DeterminantCollapse { i: usize, j: usize, det: f64, prec: u32 },

    /// The stacked-spectra matrix of a pencil lost full column rank.
    #[error("rank deficient stacked-spectra matrix (column {col})")]
    RankDeficient { col: usize },

    #[error("matrix column {col} is zero; Rayleigh quotient undefined")]
    ZeroColumn { col: usize },

    /// An arrowhead coupling would be imaginary: the nodes do not interlace
    /// the roots.
    #[error("positive radicand at node {index}: P(b)/Q'(b) = {value:e} > 0, nodes do not interlace")]
    PositiveRadicand { index: usize, value: f64 },

    #[error("singular matrix in LU factorization (pivot {col})")]
    Singular { col: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
