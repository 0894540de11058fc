//! Discrete Helmholtz decompositions, local zero-mean verification and
//! Maxwell/Poincaré constant estimation on voxelized domains in R³.
//!
//! The crate is organized bottom-up:
//!
//! * [`domain`] voxelizes shapes into a minimal bounding cuboid and cuts
//!   slabs and beams out of it;
//! * [`grid_calculus`] provides the staggered complex with exact
//!   `rot grad = 0`, `div rot = 0` and summation-by-parts identities;
//! * [`helmholtz`] computes the orthogonal decompositions and vector
//!   potentials;
//! * [`zeromean`] checks the slab and beam mean-value estimates;
//! * [`constants`] estimates Poincaré, Friedrichs and Maxwell constants and
//!   tabulates them against the diameter bounds;
//! * [`io`] reads and writes the binary mask/field files and reports.

pub mod constants;
pub mod domain;
pub mod error;
pub mod grid_calculus;
pub mod helmholtz;
pub mod io;
mod laplace;
pub mod solver;
pub mod zeromean;

pub use error::{Error, Result};

/// Version string embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
