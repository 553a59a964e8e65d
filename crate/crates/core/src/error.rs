use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid representation: {0}")]
    InvalidRepresentation(String),
    #[error("malformed word: {0}")]
    MalformedWord(String),
    #[error("out of scope: {0}")]
    OutOfScope(String),
    #[error("non-finite numeric input: {0}")]
    NumericInput(String),
    #[error("vector not in image (relative residual {residual:.3e})")]
    NotInImage { residual: f64 },
    #[error("ill-conditioned basis (condition number {condition:.3e})")]
    IllConditionedBasis { condition: f64 },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("matrix is not antisymmetric (relative defect {defect:.3e})")]
    Symmetry { defect: f64 },
    #[error("sampling failed: {0}")]
    SamplingFailure(String),
    #[error("commutator solver failed: {0}")]
    SolverFailure(String),
    #[error("invalid block: {0}")]
    InvalidBlock(String),
    #[error("condition (C) undefined: {0}")]
    ConditionCUndefined(String),
    #[error("tolerance failure: {0}")]
    ToleranceFailure(String),
    #[error("not a cocycle (residual {residual:.3e})")]
    NotACocycle { residual: f64 },
    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),
    #[error("sequence is not exact: {0}")]
    NotExact(String),
    #[error("cup product formula check failed: {0}")]
    CupFormula(String),
    #[error("connecting map produced a non-cocycle (residual {residual:.3e})")]
    SnakeConstruction { residual: f64 },
    #[error("inconsistent decomposition: {0}")]
    DecompositionInconsistency(String),
    #[error("basis completion failed: {0}")]
    BasisCompletion(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl Error {
    /// Errors caused by the input data (degenerate or unlucky samples) rather
    /// than by a failed verification.
    pub fn is_degenerate_input(&self) -> bool {
        !matches!(self, Error::CupFormula(_))
    }
}
