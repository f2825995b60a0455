//! Positive quasi-metric kernels on finite measure spaces, the linear and
//! intrinsic nonlinear potentials they generate, and the sublinear equation
//! `u = G(u^q sigma) + f` with `0 < q < 1`.
//!
//! Indices are zero-based throughout. Every integral over a ball radius is
//! an exact finite sum over the distinct values of a kernel row.

pub mod capacity;
pub mod error;
pub mod io;
pub mod kernels;
pub mod lp;
pub mod numeric;
pub mod potentials;
pub mod solver;
pub mod space;

pub use error::{Error, Result};
pub use kernels::{Kernel, Modifier};
pub use numeric::Exponent;
pub use solver::{Forcing, Problem, SolveOptions, SolveResult, SolveStatus};
pub use space::{IndexSet, Measure};
