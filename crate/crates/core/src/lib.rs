//! Unfitted isoparametric Scott-Vogelius finite elements for the Stokes
//! equations on domains given by a level set.
//!
//! The pipeline is: structured background mesh ([`mesh`]) -> Alfeld split and
//! element classification -> isoparametric deformation and cut quadrature
//! ([`geometry`]) -> Piola-mapped spaces ([`spaces`]) -> forms and the saddle
//! point system ([`forms`]) -> sparse direct solve ([`solver`]) -> pressure
//! recovery ([`postprocess`]). [`harness`] drives convergence and
//! conditioning studies.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod forms;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod postprocess;
pub mod quadrature;
pub mod solver;
pub mod spaces;

pub use error::{Error, Result};
