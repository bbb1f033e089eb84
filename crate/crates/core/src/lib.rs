//! First-order methods for minimizing smooth convex matrix losses over rank-k
//! projection matrices and the Fantope, with optimality certificates and a
//! robust-PCA experiment harness.

pub mod certificates;
pub mod datagen;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod objective;
pub mod par;
pub mod solvers;
pub mod spectral;

pub use error::{Error, Result};
