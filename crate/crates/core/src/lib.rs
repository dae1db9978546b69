//! Heisenberg-picture simulation of gapped adiabatic paths on small periodic
//! spin lattices.
//!
//! The crate builds the quasi-adiabatic generator `K(s) = Σ_j F_s(h'_j)` from a
//! smooth compactly supported spectral filter, truncates it to finite windows
//! around a local observable, and integrates the truncated propagator to obtain
//! approximate ground-state expectation values along `H(s) = H₀ + s H'`.
//! Exact diagonalization on the full lattice serves as the reference.
//!
//! Module map:
//! - [`lattice`]: periodic 1D/2D geometry, metric, balls and sumsets.
//! - [`operators`]: Pauli-string algebra and dense window matrices.
//! - [`filter`]: the bump function, its time transform and the spectral weight.
//! - [`hamiltonian`]: parametrised Hamiltonians, restrictions, spectra.
//! - [`quasiadiabatic`]: the filter map, shell terms and truncated generators.
//! - [`heisenberg`]: truncated propagators and evolved observables.
//! - [`oracle`]: exact-diagonalization checks and light-cone measurements.
//! - [`cli`]: the experiment runner behind the `adiacont` binary.

pub mod cli;
pub mod error;
pub mod filter;
pub mod fit;
pub mod hamiltonian;
pub mod heisenberg;
pub mod lattice;
pub mod linalg;
pub mod operators;
pub mod oracle;
pub mod quadrature;
pub mod quasiadiabatic;

pub use error::{Error, Result};
pub use faer::c64;
