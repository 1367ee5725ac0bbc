//! Exact-diagonalization laboratory for ground-state fidelity susceptibility.
//!
//! The crate covers the asymmetric Hubbard model and the transverse-field
//! Ising ring: fixed-particle-number bases, matrix-free Hamiltonians, a
//! thick-restart Lanczos ground-state solver, three routes to the fidelity
//! susceptibility, finite-size-scaling fits, and the free-fermion Ising
//! oracle.
//!
//! Everything here is pure computation over `alloc`. With the default `std`
//! feature disabled the crate builds as `no_std`; file formats, sweeps and
//! the command line live in the `critx` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod basis;
pub mod eigen;
mod error;
pub mod fidelity;
pub mod models;
pub mod scaling;
pub mod stats;
pub mod tfim_oracle;

pub use error::{Error, Result};
