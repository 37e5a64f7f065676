//! One-dimensional clock-construction Hamiltonians for adiabatic computation
//! and the QMA local-Hamiltonian reduction, at a scale where every structural
//! claim can be checked by enumeration and exact diagonalization.

pub mod adiabatic;
pub mod chain_model;
pub mod circuit;
pub mod encoding;
pub mod error;
pub mod hamiltonian;
pub mod linalg;
pub mod qma;
pub mod spectral;
pub mod subspace;

pub use error::{Error, Result};

/// Version string embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
