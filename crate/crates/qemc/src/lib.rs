//! Numerical laboratory for quantum-enhanced and quantum-inspired Markov
//! chain Monte Carlo on fully connected Ising spin glasses.
//!
//! The crate builds proposal matrices for Metropolis-Hastings chains from
//! several families of quantum time evolutions (exact, Trotterized,
//! time-dependent, QAOA-style) and from truncated matrix-product-state
//! emulation of the same dynamics, then measures spectral gaps, mixing-time
//! bounds, and thermodynamic observables of the underlying transverse-field
//! spin glass.

pub mod campaign;
pub mod chain;
pub mod instances;
pub mod linalg;
pub mod mps;
pub mod phase;
pub mod schedopt;
pub mod unitary;
