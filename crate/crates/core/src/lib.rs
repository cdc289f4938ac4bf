//! Mixed finite element simulator for two-phase porous-media flow in
//! global/complementary-pressure form, with backward Euler in time and the
//! L-scheme fixed-point linearization inside each time step.

// `!(a < b)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod fespace;
pub mod grid;
pub mod io;
pub mod linsolve;
pub mod model;
pub mod quadrature;
pub mod sparse;
pub mod stepper;

pub use error::{Error, Result};
pub use grid::{BoundarySide, Point, Side, StructuredGrid};
