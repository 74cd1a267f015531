//! Spin-resolved scattering of massless Dirac fermions from an eccentric
//! annular gate junction, with the matching classical ray dynamics.
//!
//! Units are dimensionless throughout: `hbar = v_F = R_1 = 1`.

pub mod error;
pub mod grid;
pub mod junction;
pub mod linalg;
pub mod observables;
pub mod raytrace;
pub mod scattering;
pub mod specfun;

pub use error::{Error, Result};
