//! Numerical laboratory for Nekhoroshev-type stability of near-integrable,
//! quasi-convex Hamiltonians.

pub mod dynamics;
pub mod error;
pub mod frequency_geometry;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod planner;
pub mod resonance_lattice;

pub use error::{Error, Result};

/// Crate version recorded in every manifest.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
