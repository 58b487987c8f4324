use thiserror::Error;

/// Everything that can go wrong inside the library.
///
/// Verdict-style operations (positivity classifications, identity residuals)
/// do not use this type for a negative answer; they return a report instead.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("weight sequence is not decreasing at index {index}: {prev} < {next}")]
    NonDecreasingWeights { index: usize, prev: f64, next: f64 },
    #[error("weight sequence is invalid: {0}")]
    BadWeights(String),
    #[error("Bergman exponent must be >= 1, got {0}")]
    BadBeta(f64),
    #[error("series has a zero constant term")]
    ZeroConstantTerm,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("operator is not Hermitian (asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },
    #[error("operator is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("Douglas factorization precondition fails (min eigenvalue of G*G - F*F is {min_eigenvalue:e})")]
    NotSubordinate { min_eigenvalue: f64 },
    #[error("operator is not an isometry (residual {residual:e})")]
    NotIsometry { residual: f64 },
    #[error("tuple arity {got} does not match weight arity {expected}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("operators {i} and {j} do not commute (residual {residual:e})")]
    NotCommuting { i: usize, j: usize, residual: f64 },
    #[error("operator {index} is not a contraction (norm {norm})")]
    NotContraction { index: usize, norm: f64 },
    #[error("point lies outside the open unit polydisc")]
    OutsideDisc,
    #[error("multiplier degree {degree} does not fit below the target cutoff {cutoff}")]
    DegreeOverflow { degree: usize, cutoff: usize },
    #[error("tuple is not a hypercontraction: {0}")]
    NotHypercontractive(String),
    #[error("dilation isometry residual {residual:e} exceeds budget {budget:e}")]
    IsometryResidualTooLarge { residual: f64, budget: f64 },
    #[error("Douglas lift fails at stage {stage}: {source}")]
    DouglasPreconditionFailed { stage: String, source: Box<Error> },
    #[error("lift condition fails for block mask {mask:#b} (residual {residual:e})")]
    LiftConditionFailed { mask: usize, residual: f64 },
    #[error("model would need {needed} rows, above the cap of {cap}")]
    BlockBudgetExceeded { needed: usize, cap: usize },
    #[error("operator is not pure (tail norm {tail_norm:e})")]
    NotPure { tail_norm: f64 },
    #[error("truncation horizon {horizon} is too short (leftover {leftover:e})")]
    HorizonTooShort { horizon: usize, leftover: f64 },
    #[error("expected a unitary input (residual {residual:e})")]
    NotUnitaryInput { residual: f64 },
    #[error("equivalence violated: gamma-contractive={gamma}, W-hypercontraction={hyper}")]
    EquivalenceViolation { gamma: bool, hyper: bool },
    #[error("fractional series tail {tail:e} exceeds tolerance {tol:e}")]
    SeriesTailTooLarge { tail: f64, tol: f64 },
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
