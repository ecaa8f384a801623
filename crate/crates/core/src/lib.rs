//! Sublinear expectations of G-normal and sequentially independent random
//! vectors.
//!
//! Expectations of G-normal laws come from solving the G-heat equation with a
//! monotone explicit scheme ([`pde`]); sequentially independent vectors are
//! handled by nesting one-dimensional solves ([`expectation`]). The
//! [`scenarios`] module turns the known structural identities and
//! non-independence witnesses into machine-checkable verdicts.

pub mod catalog;
pub mod cli;
pub mod expectation;
pub mod gamma;
pub mod pde;
pub mod scenarios;
pub mod testfn;

pub use expectation::{ExpectationError, ExpectationResult, RandomVectorSpec};
pub use gamma::{GammaError, GammaSet, SymMatrix, UncertaintyInterval};
pub use pde::{GridSpec, PdeError, SolveReport, SolverConfig};
pub use testfn::{Shape, TestFunction};
