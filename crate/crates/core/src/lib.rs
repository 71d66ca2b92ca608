//! Two-dimensional quasi-static fracture solver for quasi-brittle materials.
//!
//! The solver couples a displacement field with a scalar phase field on
//! tensor-product B-spline patches. Smooth (C¹) spline bases allow the
//! crack surface density to carry a Laplacian term, so both the classic
//! second-order regularization and the fourth-order one are available.
//! Cohesive softening enters through a parametric degradation function
//! calibrated to linear, exponential, hyperbolic, or Cornelissen laws.
//!
//! Crates built on top of this library drive it through [`config::RunConfig`]
//! (JSON), run simulations via [`solver::run_simulation`], and write
//! load curves (CSV) and field snapshots (legacy VTK).

pub mod assembly;
pub mod config;
pub mod error;
pub mod material;
pub mod mesh;
pub mod oracle1d;
pub mod output;
pub mod solver;
pub mod splines;
pub mod verify;

pub use error::{Error, Result};
