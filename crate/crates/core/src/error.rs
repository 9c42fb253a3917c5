use thiserror::Error;

use crate::domain::DomainError;
use crate::expr::ExprError;
use crate::field::FieldError;
use crate::norms::NormError;
use crate::sparse::SolveError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid simulation parameter: {0}")]
    InvalidParams(String),
    #[error("non-finite value in {field} at step {step}")]
    NonFinite { field: &'static str, step: usize },
    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("missing diagnostics: {0}")]
    MissingDiagnostics(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
