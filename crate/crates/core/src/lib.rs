//! Saddle-point solvers for Wasserstein barycenters of discrete measures.
//!
//! The barycenter problem over `m` histograms on a common support of size `n`
//! is written as a bilinear min-max problem: the primal side holds one
//! transport plan per measure plus the barycenter candidate (each on a
//! simplex), the dual side holds box-constrained marginal multipliers. Two
//! solvers work on that form:
//!
//! * [`mirror_prox`]: mirror prox with entropy on the simplices and the
//!   Euclidean geometry on the box.
//! * [`area_convex`]: dual extrapolation with an area-convex regularizer whose
//!   prox steps are solved by closed-form alternating minimization.
//!
//! Every run is certified by the exact duality gap in [`operator`]. The
//! [`ibp`] module holds the entropic baseline and [`oracle1d`] the exact
//! transport oracles on the line.

pub mod area_convex;
pub mod error;
pub mod geometry;
pub mod ibp;
pub mod io;
pub mod mirror_prox;
pub mod numeric;
pub mod operator;
pub mod oracle1d;
pub mod problem;
pub mod report;
pub mod sample;
pub mod suite;

pub use error::{Error, Result};
pub use problem::{vectorize_cost, BarycenterProblem, CostData, DualPoint, Histogram, PrimalPoint};
pub use report::{Algorithm, Record, RunOptions, RunReport, SolveOutput};
