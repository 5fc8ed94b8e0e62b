use thiserror::Error;

use crate::sdp::SolveStatus;

/// Errors raised while building, solving, or post-processing a synthesis problem.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum CbfError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid problem specification: {}", .0.join("; "))]
    SpecInvalid(Vec<String>),

    #[error("rank condition violated: Ac is not in range(B) (residual {residual:.3e})")]
    RankConditionViolated { residual: f64 },

    #[error("monomial of degree {degree} exceeds Gram basis capacity {capacity}")]
    DegreeOverflow { degree: u32, capacity: u32 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPsd { min_eig: f64 },

    #[error("input budget exhausted: {0}")]
    BudgetExhausted(String),

    #[error("vertex list is empty")]
    EmptyVertexList,

    #[error("ill-conditioned matrix (condition number {cond:.3e})")]
    IllConditioned { cond: f64 },

    #[error("solver reported {status:?}: {detail}")]
    Infeasible { status: SolveStatus, detail: String },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unbounded control: g(x) = 0 with f(x) = {f:.6e} < 0")]
    UnboundedControl { f: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = CbfError> = std::result::Result<T, E>;
