//! Giant atoms coupled to a one-dimensional Su–Schrieffer–Heeger waveguide.
//!
//! The crate is `no_std` (it needs `alloc`) and purely numerical. All energies
//! are dimensionless multiples of the mean hopping `J`, times are in units of
//! `1/J`, and cells are indexed from zero.
//!
//! * [`lattice`]: Bloch bands, disorder, and the real-space Hamiltonian.
//! * [`couplings`]: `p(k)`/`q(k)`, bandgap (virtual-photon) couplings and
//!   band-regime (Markovian) coherent and dissipative couplings.
//! * [`boundstates`]: self-energy, bound-state energies and amplitudes.
//! * [`dynamics`]: exact, effective and master-equation evolution plus
//!   observables.

#![cfg_attr(not(test), no_std)]
#![cfg_attr(test, allow(unused_imports))]

extern crate alloc;

pub mod boundstates;
pub mod couplings;
pub mod dynamics;
mod error;
pub mod lattice;
pub mod linalg;
pub mod quadrature;

pub use error::{Error, Result};
pub use lattice::{
    BandEdges, CouplingNode, DisorderSpec, GiantAtomSpec, RealSpaceHamiltonian, SpectralRegion,
    Sublattice, WaveguideParams,
};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
