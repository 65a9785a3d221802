//! Subcritical contact process on ℤ seen from its rightmost infected site:
//! graphical construction, edge process, quasi-stationary spectra, Yaglom
//! limit estimation and the break-point machinery behind the convergence
//! criteria.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod criteria;
pub mod edge;
pub mod error;
pub mod graphical;
pub mod lattice;
pub mod breakpoint;
pub mod parallel;
pub mod rng;
pub mod spectral;
pub mod splitting;
pub mod stats;
pub mod verify;
pub mod yaglom;

pub use error::{Error, Result};
