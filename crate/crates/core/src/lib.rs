//! Numerical laboratory for the degenerate parabolic p-Laplace equation
//! `u_t - div(|grad u|^{p-2} grad u) = mu` with Radon-measure data.
//!
//! The crate solves the equation by implicit Euler (each step a strictly
//! convex minimization), evaluates truncated Wolff potentials of the data,
//! runs the Kilpelainen-Maly level iteration on the discrete solution and
//! compares the pointwise value `u(y, s)` with the Wolff-potential bound.
//!
//! Module map:
//! - [`params`]: problem constants, domain geometry and validation.
//! - [`measure`]: atomic + density measures with ball-mass queries.
//! - [`wolff`]: truncated Wolff potentials.
//! - [`solver`]: minimizing-movement solver and weak-form audit.
//! - [`km`]: level functional, cutoffs and level selection.
//! - [`verifier`]: scenarios, verdicts, CSV output and the command runner.

pub mod error;
pub mod grid;
pub mod km;
pub mod measure;
pub mod params;
pub mod quadrature;
pub mod solver;
pub mod verifier;
pub mod wolff;

pub use error::{Error, Result};
pub use grid::{Grid, Point};
pub use measure::{DensityGrid, RadonMeasure};
pub use params::{validate, Domain, Params, ValidationReport};
pub use wolff::{WolffQuery, WolffValue};
