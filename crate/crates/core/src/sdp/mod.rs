//! Semidefinite programs: decision layouts, LMI blocks, program builders and
//! the conic backend interface.

pub mod backend;
pub mod builder;
pub mod clarabel;
pub mod layout;
pub mod lmi;
pub mod lower;
pub mod problem;

pub use backend::{BackendOutput, Cone, SolveStatus, SolverBackend, SolverOptions, StandardForm};
pub use clarabel::ClarabelBackend;
pub use layout::{DecisionLayout, DenseVar, ScalarVar, SymVar, VarShape};
pub use lmi::{AffineMatrix, LmiBlock, Sense};
pub use problem::{ConicProblem, LinearConstraint, Solution};
