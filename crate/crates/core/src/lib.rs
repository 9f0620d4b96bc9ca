//! Numerical laboratory for Bose-Einstein condensation of dilute trapped
//! gases in the Gross-Pitaevskii limit.
//!
//! Modules:
//! - [`model`]: traps, pair potentials, grids, the problem document.
//! - [`scattering`]: zero-energy scattering length and kinetic fraction.
//! - [`gp`]: Gross-Pitaevskii minimization and energy bookkeeping.
//! - [`manybody`]: few-boson exact diagonalization and condensate diagnostics.
//! - [`poincare`]: the generalized Poincaré inequality and its constants.
//! - [`cli`]: configuration, caching, reports and verification.

pub mod cli;
pub mod error;
pub mod gp;
pub mod manybody;
pub mod model;
pub mod numerics;
pub mod poincare;
pub mod scattering;

pub use error::{Error, Result};
