//! Numerical laboratory for a quantum particle in a low-density random
//! obstacle field.
//!
//! The crate implements the computable objects of the quantum Lorentz gas in
//! its Boltzmann-Grad scaling: single-obstacle potentials and their Born
//! series, on-shell T-matrices and quantum cross sections, spectral
//! Schrodinger evolution on a periodic box, Wigner/Husimi phase-space
//! densities with macroscopic rescaling, the collision-history expansion of
//! the propagator, and two independent solvers for the limiting linear
//! Boltzmann equation.  Modules are cross-validated against each other:
//! Born series against partial waves, the divided-difference free kernel
//! against its resolvent representation, the collision expansion against
//! exact evolution, and the deterministic collision series against a Monte
//! Carlo jump process.

pub mod boltzmann;
pub mod conventions;
pub mod duhamel;
pub mod error;
pub mod geom;
pub mod io;
pub mod linalg;
pub mod ode;
pub mod phase_space;
pub mod potential;
pub mod quad;
pub mod scattering;
pub mod schrodinger;
pub mod specfun;

pub use error::{Error, Result};

/// Complex double used throughout.
pub type C64 = num_complex::Complex64;
