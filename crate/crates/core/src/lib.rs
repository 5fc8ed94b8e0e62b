//! Co-design of quadratic control barrier functions and affine state-feedback
//! controllers for continuous-time linear systems via semidefinite programming.

// links the system BLAS/LAPACK used by the conic solver
extern crate openblas_src;

pub mod error;
pub mod expr;
pub mod io;
pub mod model;
pub mod poly;
pub mod sdp;
pub mod sets;
pub mod sos;
pub mod synthesis;
pub mod verify;

pub use error::{CbfError, Result};
pub use poly::{Monomial, Polynomial};
