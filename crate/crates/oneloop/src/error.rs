use std::fmt;

/// Errors surfaced by the exact engines.
///
/// Construction-time validation is strict: every operation checks its
/// preconditions (shared base points, truncation orders, invertible
/// Hessians) before doing any arithmetic, so arithmetic itself never
/// has to guess.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two jets disagree on variable count, truncation order or base point.
    ShapeMismatch(String),
    /// Scalars from different backends (or different extension towers) were mixed.
    BackendMismatch(String),
    /// Division by a jet whose constant term is zero, or by the zero scalar.
    DivisionByNonUnit,
    /// A required root (square root, q-th root) does not exist in the active backend.
    RootNotRepresentable(String),
    /// The Hessian of f is singular at the base point.
    SingularHessian,
    /// A Jacobian needed for map inversion or implicit solving is singular.
    SingularJacobian,
    /// The seed passed to an implicit solve is not a root at the base point.
    SeedNotRoot,
    /// A jet has insufficient truncation order for the requested computation.
    OrderDeficit { needed: usize, got: usize, what: &'static str },
    /// An expression was evaluated at a pole of one of its subterms.
    PoleAtBase,
    /// Expression syntax error with byte offset into the source text.
    Syntax { offset: usize, message: String },
    /// A variable was used without being declared.
    UndeclaredVariable { offset: usize, name: String },
    /// The quadratic-part eigenvalue condition of the convolution identity fails.
    EigenvalueCondition(String),
    /// A denominator divisible by the support polynomial was encountered.
    DenominatorDivisibleBySupport,
    /// A pair failed an admissibility precondition (reported, not ignored).
    Inadmissible { loop_order: usize, detail: String },
    /// Degenerate input configuration (vanishing denominator, zero polynomial, ...).
    Degenerate(String),
    /// Anything else worth an exact message.
    Invalid(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch(s) => write!(f, "shape mismatch: {s}"),
            Error::BackendMismatch(s) => write!(f, "scalar backend mismatch: {s}"),
            Error::DivisionByNonUnit => write!(f, "division by a non-invertible element"),
            Error::RootNotRepresentable(s) => write!(f, "root not representable in backend: {s}"),
            Error::SingularHessian => write!(f, "singular Hessian at base point"),
            Error::SingularJacobian => write!(f, "singular Jacobian at base point"),
            Error::SeedNotRoot => write!(f, "seed is not a root at the base point"),
            Error::OrderDeficit { needed, got, what } => {
                write!(f, "jet order too low for {what}: need {needed}, got {got}")
            }
            Error::PoleAtBase => write!(f, "expression has a pole at the base point"),
            Error::Syntax { offset, message } => {
                write!(f, "syntax error at byte {offset}: {message}")
            }
            Error::UndeclaredVariable { offset, name } => {
                write!(f, "undeclared variable `{name}` at byte {offset}")
            }
            Error::EigenvalueCondition(s) => write!(f, "eigenvalue condition violated: {s}"),
            Error::DenominatorDivisibleBySupport => {
                write!(f, "denominator divisible by the support polynomial")
            }
            Error::Inadmissible { loop_order, detail } => {
                write!(f, "pair not admissible at loop order {loop_order}: {detail}")
            }
            Error::Degenerate(s) => write!(f, "degenerate configuration: {s}"),
            Error::Invalid(s) => write!(f, "{s}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
