//! Numerics for a single non-relativistic particle coupled to a scalar or
//! transverse quantized field on a momentum lattice.
//!
//! Modules follow the data flow: [`grid`] builds the one-photon space,
//! [`fock`] the truncated bosonic Fock space over it, [`model`] the
//! Hamiltonians and their dressing transform, [`evolve`] the time evolution,
//! and [`probe`] the propagation observables and rate fits.

pub mod error;
pub mod evolve;
pub mod fock;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod probe;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default memory budget for assembled operators, in megabytes.
pub const DEFAULT_BUDGET_MB: usize = 2048;
