use thiserror::Error;

pub type Result<T> = std::result::Result<T, SspError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SspError {
    #[error("invalid method: {0}")]
    InvalidMethod(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// `I + rA` has a (numerically) zero pivot at this radius.
    #[error("I + rA is singular at r = {r}")]
    SingularTransform { r: f64 },

    #[error("radius must be positive to undo the transformation")]
    ZeroRadius,

    #[error("stage count must be at least {min}, got {s}")]
    InvalidStageCount { s: usize, min: usize },

    #[error("w^T N^2 e = {0:e} is too small to form the objective ratio")]
    DegenerateDenominator(f64),

    #[error("weights are not on the probability simplex: {0}")]
    InvalidSimplex(String),

    #[error("weight vector has zero sum")]
    ZeroVector,

    #[error("matrix has negative entries")]
    NegativeEntries,

    #[error("alpha^2/beta = {ratio} exceeds the induction bound {bound}")]
    HypothesisViolated { ratio: f64, bound: f64 },

    #[error("leading block is singular")]
    SingularBlock,

    #[error("matrix is not lower triangular")]
    NotLowerTriangular,

    #[error("method is not diagonally implicit")]
    NotDirk,

    #[error("no usable sample after {0} attempts")]
    DegenerateSample(usize),

    #[error("stage {stage} did not converge: residual {residual:e} after {iterations} iterations")]
    StageSolveFailure {
        stage: usize,
        residual: f64,
        iterations: usize,
    },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("malformed method file: {0}")]
    Parse(String),
}

impl From<serde_json::Error> for SspError {
    fn from(e: serde_json::Error) -> Self {
        SspError::Parse(e.to_string())
    }
}
