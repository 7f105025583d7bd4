//! Bloch-block engine for boosted exciton polaron-polariton Hamiltonians.
pub mod basis;
#[cfg(doctest)]
mod book;
pub mod cli;
pub mod config;
pub mod error;
pub mod hamiltonian;
pub mod hydrogen2d;
pub mod linalg;
pub mod model;
pub mod observables;
pub mod oracle;
pub mod solve;
pub mod special;

pub use error::{Error, Result};
