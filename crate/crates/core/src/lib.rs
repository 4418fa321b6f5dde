//! Numerical construction and verification of inner and outer solutions of a
//! singularly perturbed linear PDE in two complex time variables.
//!
//! The pipeline works in three planes. In the Borel plane an auxiliary
//! function is produced by a fixed-point iteration over a weighted frequency
//! space; a merged Laplace kernel along deformable rays carries it back to
//! the time variables; an inverse Fourier transform assembles the solution on
//! a horizontal strip. On top of the constructive layer sit quantitative
//! checks: root-collapse demonstrations, kernel-decay envelopes, and
//! exponential-flatness order fits for differences of solutions on
//! consecutive sectors.

pub mod asymptotics;
pub mod assembly;
pub mod borel;
pub mod config;
pub mod dual;
pub mod error;
pub mod gamma;
pub mod geometry;
pub mod grids;
pub mod pipeline;
pub mod poly;
pub mod quad;
pub mod reference;
pub mod report;
pub mod scaled;
pub mod spec;
pub mod transforms;

pub use error::{Error, Result};
pub use num_complex::Complex64;
