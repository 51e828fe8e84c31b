//! Process-matrix simulation of spatial, temporal and spatio-temporal
//! quantum correlations.
//!
//! The crate builds processes and instruments in Choi form, evaluates the
//! generalized Born rule, scores Bell-type functionals against classical
//! bounds and searches measurement angles for maximal violations.

pub mod classical;
pub mod correlations;
pub mod error;
pub mod exec;
pub mod operations;
pub mod optimizer;
pub mod process;
pub mod random;
pub mod tensor;

pub use error::{Error, Result};
pub use exec::Execution;
