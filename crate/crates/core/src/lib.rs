//! Parameter estimation with one clean qubit.
//!
//! The crate simulates deterministic quantum computation with one pure
//! ancilla and a maximally mixed probe, and builds adaptive Bayesian
//! estimators on top of the noisy normalized traces such circuits return.

pub mod circuit;
pub mod continuous;
pub mod dense;
pub mod discrete;
pub mod error;
pub mod frame;
pub mod measurement;
pub mod multiparam;
pub mod oracle;
pub mod posterior;
pub mod pauli;
pub mod record;
pub mod search;
pub mod stats;

pub use error::{Error, Result};
