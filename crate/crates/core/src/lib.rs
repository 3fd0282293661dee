//! Simulation and analysis of photodetection-mediated feedback in lossy
//! optical cavities.
//!
//! - [`fock`]: truncated Fock-space operators, states and the one-photon
//!   feedback map
//! - [`liouville`]: the feedback master equation, its RK4 integrator and
//!   closed-form propagators
//! - [`mcwf`]: quantum-trajectory unraveling with reproducible parallel ensembles
//! - [`qubit`]: polarization-coded qubits and their minimum fidelity
//! - [`stirap`]: adiabatic passage of the feedback atom
//! - [`cli`]: configuration-driven scenario runner behind the `cavfb` binary

pub mod cli;
pub mod error;
pub mod fock;
pub mod liouville;
pub mod mcwf;
pub mod qubit;
pub mod stirap;

pub use error::{Error, Result};
