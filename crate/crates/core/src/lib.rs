//! Shortcuts to adiabaticity for finite-dimensional quantum systems.
//!
//! The crate builds counterdiabatic Hamiltonians exactly (from the
//! instantaneous eigenbasis) and approximately (variational nested
//! commutators, algebraic trial bases, Krylov/Lanczos chains), simulates the
//! resulting dynamics, engineers Hamiltonians from dynamical invariants,
//! applies fast-forward scaling, Trotterizes counterdiabatic driving and
//! certifies approximate protocols with quantum speed limits.
//!
//! All quantities are dense complex matrices; `hbar` is passed explicitly and
//! defaults to [`HBAR`] in the examples and the CLI.

pub mod agp;
pub mod digitized;
pub mod dynamics;
pub mod error;
pub mod fastforward;
pub mod grid;
pub mod invariant;
pub mod models;
pub mod operator;
mod precision;
pub mod qsl;
pub mod schedule;
pub mod spectral;

pub use error::{Error, Result};
pub use operator::{CMatrix, CVector, HermitianOperator, Ket, OperatorBasis, C64};
pub use schedule::{Hamiltonian, ParamSchedule, ParametricFamily, Protocol};

/// Reduced Planck constant in natural units.
pub const HBAR: f64 = 1.0;
