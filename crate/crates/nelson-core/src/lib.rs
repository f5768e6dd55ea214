//! Numerical laboratory for the multiscale construction of the Nelson-model
//! mass shell on truncated Fock spaces.

pub mod dressing;
pub mod error;
pub mod experiment;
pub mod fock;
pub mod hamiltonian;
pub mod linalg;
pub mod multiscale;
pub mod quad;
pub mod schedule;
pub mod spectral;
pub mod verify;

pub use error::{LabError, Result};
