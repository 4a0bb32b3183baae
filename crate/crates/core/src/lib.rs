//! Maximal surface-group representations into SO0(2, n+1).
//!
//! Pseudo-Euclidean linear algebra, the spaces H^{2,n} and Ein^{1,n}, genus-2
//! surface groups and explicit representations, length spectra, a discrete
//! equivariant maximal surface solver and the developing maps of the
//! associated geometric structures.

pub mod bilinear;
pub mod cli;
pub mod config;
pub mod error;
pub mod group;
pub mod hp;
pub mod reps;
pub mod spaces;
pub mod spectrum;
pub mod structures;
pub mod surface;

pub use error::{Error, Result};
