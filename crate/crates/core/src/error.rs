//! Error type shared by every stage of the engine.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine can report.
///
/// [`Error::class`] gives a stable machine-readable tag per variant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("syntax error in {field} at column {column}: {message}")]
    ExprSyntax {
        field: String,
        column: usize,
        message: String,
    },
    #[error("constraint error: {0}")]
    Constraint(String),
    #[error("unbound name `{0}`")]
    UnboundName(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("arity error: {0}")]
    Arity(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("entity pool `{kind}` holds {available} entries but {requested} were requested")]
    ExhaustedPool {
        kind: String,
        available: usize,
        requested: usize,
    },
    #[error("unknown operator tag `{0}`")]
    UnknownOperatorTag(String),
    #[error("model does not belong to this instance")]
    ForeignModel,
    #[error("unknown source `{0}`")]
    UnknownSource(String),
    #[error("cyclic dependency between variables: {}", .0.join(" -> "))]
    CyclicDependency(Vec<String>),
    #[error("empty domain: {0}")]
    EmptyDomain(String),
    #[error("selection exhausted: {0}")]
    SelectionExhausted(String),
    #[error("formula does not yield a constraint: {0}")]
    FormulaType(String),
    #[error("solver unavailable: {0}")]
    SolverUnavailable(String),
    #[error("solver budget exceeded")]
    SolverTimeout,
    #[error("objective is unbounded")]
    Unbounded,
    #[error("constraints are infeasible")]
    Infeasible,
    #[error("objective is not linear: {0}")]
    NonlinearObjective(String),
    #[error("answer assertion failed: {0}")]
    AssertionFailed(String),
    #[error("solution set is empty")]
    EmptySolutionSet,
    #[error("solution set truncated at {0} models")]
    TruncatedSolutionSet(usize),
    #[error("option synthesis exhausted for query `{0}`")]
    OptionSynthesisExhausted(String),
    #[error("render error: {0}")]
    Render(String),
    #[error("no prompt wrapper for qtype `{0}`")]
    MissingWrapper(String),
    #[error("generation exhausted after {attempts} attempts (last failure: {last})")]
    GenerationExhausted { attempts: usize, last: Box<Error> },
    #[error("config does not match the spec: {0}")]
    ConfigShapeMismatch(String),
    #[error("specs differ outside descriptive text: {0}")]
    StructuralMismatch(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable error-class tag.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Schema(_) => "SchemaError",
            Error::ExprSyntax { .. } => "ExprSyntaxError",
            Error::Constraint(_) => "ConstraintError",
            Error::UnboundName(_) => "UnboundName",
            Error::TypeMismatch(_) => "TypeMismatch",
            Error::Arity(_) => "ArityError",
            Error::DivisionByZero => "DivisionByZero",
            Error::ExhaustedPool { .. } => "ExhaustedPool",
            Error::UnknownOperatorTag(_) => "UnknownOperatorTag",
            Error::ForeignModel => "ForeignModel",
            Error::UnknownSource(_) => "UnknownSource",
            Error::CyclicDependency(_) => "CyclicDependency",
            Error::EmptyDomain(_) => "EmptyDomain",
            Error::SelectionExhausted(_) => "SelectionExhausted",
            Error::FormulaType(_) => "FormulaTypeError",
            Error::SolverUnavailable(_) => "SolverUnavailable",
            Error::SolverTimeout => "SolverTimeout",
            Error::Unbounded => "Unbounded",
            Error::Infeasible => "Infeasible",
            Error::NonlinearObjective(_) => "NonlinearObjective",
            Error::AssertionFailed(_) => "AssertionFailed",
            Error::EmptySolutionSet => "EmptySolutionSet",
            Error::TruncatedSolutionSet(_) => "TruncatedSolutionSet",
            Error::OptionSynthesisExhausted(_) => "OptionSynthesisExhausted",
            Error::Render(_) => "RenderError",
            Error::MissingWrapper(_) => "MissingWrapper",
            Error::GenerationExhausted { .. } => "GenerationExhausted",
            Error::ConfigShapeMismatch(_) => "ConfigShapeMismatch",
            Error::StructuralMismatch(_) => "StructuralMismatch",
            Error::Io(_) => "IoError",
        }
    }

    /// Whether a fresh random draw may avoid this failure.
    pub fn is_resamplable(&self) -> bool {
        matches!(
            self,
            Error::SelectionExhausted(_)
                | Error::EmptyDomain(_)
                | Error::SolverTimeout
                | Error::Infeasible
                | Error::Unbounded
                | Error::AssertionFailed(_)
                | Error::EmptySolutionSet
                | Error::TruncatedSolutionSet(_)
                | Error::OptionSynthesisExhausted(_)
        )
    }

    pub(crate) fn syntax(column: usize, message: impl Into<String>) -> Self {
        Error::ExprSyntax {
            field: String::from("expression"),
            column,
            message: message.into(),
        }
    }

    /// Attach a field path to a syntax error.
    pub(crate) fn in_field(self, field: &str) -> Self {
        match self {
            Error::ExprSyntax {
                column, message, ..
            } => Error::ExprSyntax {
                field: field.to_string(),
                column,
                message,
            },
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
