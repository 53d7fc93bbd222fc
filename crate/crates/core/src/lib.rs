//! Exact numerics for Stark many-body localization in long-range tilted
//! Ising chains: level statistics, quench dynamics, echo interferometry,
//! noise emulation, Trotterized evolution and the strong-tilt effective
//! Hamiltonian.

pub mod error;
pub mod export;
pub mod model;
pub mod noise;
pub mod observables;
pub mod propagate;
pub mod protocols;
pub mod spectrum;
pub mod spinspace;
pub mod sweff;

pub use error::{Error, Result};
