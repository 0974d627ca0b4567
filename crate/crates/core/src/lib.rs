//! Discrete operator laboratory for a linearized compressible viscous flow
//! coupled to a clamped elastic plate through a non-dissipative kinematic
//! interface condition.
//!
//! The crate assembles the semigroup generator on a box grid, the weighted
//! inner product in which a shifted generator is dissipative, and the
//! machinery needed to check dissipativity, growth bounds and the resolvent
//! construction numerically.

pub mod ambient;
pub mod diffops;
pub mod error;
pub mod evolve;
pub mod generator;
pub mod grid;
pub mod harmonic;
pub mod identities;
pub mod linalg;
pub mod plate;
pub mod resolvent;
pub mod sparse;

pub use error::{Error, Result};
pub use sparse::{CsrMatrix, TripletBuilder};
