//! Numerical laboratory for the rescaled and renormalized lattice parabolic
//! Anderson model on the two-dimensional torus: lattice Fourier analysis,
//! Besov-Hölder norms and paraproducts, the enhanced noise, chaos moment
//! checks, the semidiscrete PAM solver, the discrete directed polymer and
//! the spectrum of the lattice Anderson Hamiltonian.

pub mod besov;
pub mod chaos;
pub mod error;
pub mod lattice;
pub mod noise;
pub mod polymer;
pub mod rng;
pub mod solver;
pub mod spectrum;
pub mod stats;

pub use error::{PamError, Result};
