//! Anisotropic p-Laplacian eigenvalue problems on planar grids, with
//! convex symmetrization and rearrangement comparison tools.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anisotropy;
pub mod energy;
pub mod error;
pub mod grid;
pub mod harness;
pub mod radial;
pub mod rearrangement;
pub mod solver;

pub use anisotropy::{NormSpec, Polygon};
pub use error::{Error, Result};
pub use grid::ScalarField;
pub use rearrangement::DecreasingProfile;
