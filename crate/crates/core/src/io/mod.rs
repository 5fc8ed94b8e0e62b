//! Text formats for problems and results.

pub mod problem;
pub mod result;

pub use problem::{parse_problem, write_problem};
pub use result::{parse_result, spec_hash, write_result, ResultFile, StoredCheck};
