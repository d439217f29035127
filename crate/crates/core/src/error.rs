use symexpr::ExprError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KundtError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("dimension n = {0} is not supported (expected 3..=6)")]
    UnsupportedDimension(usize),
    #[error("expression is singular on the equation: {0}")]
    SingularOnEquation(String),
    #[error("expression is singular on the section: {0}")]
    SingularOnSection(String),
    #[error("no generic point found after {0} attempts")]
    DegeneratePointExhausted(usize),
    #[error("unknown catalog entry '{0}'")]
    UnknownEntry(String),
    #[error("linear system is singular: {0}")]
    LinearSolveSingular(String),
    #[error("metric is singular")]
    SingularMetric,
    #[error("frame is singular")]
    SingularFrame,
    #[error("generator lists differ")]
    GeneratorMismatch,
    #[error("singular locus dominates: {rejected} of {attempted} samples rejected")]
    SingularLocusDominates { rejected: usize, attempted: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, KundtError>;
