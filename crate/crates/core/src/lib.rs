//! Numerical laboratory for pinched Randers metrics on the two-sphere.

pub mod curves;
pub mod error;
pub mod geodesics;
pub mod hopf;
pub mod knots;
pub mod linearized;
pub mod numerics;
pub mod ode;
pub mod profile;
pub mod randers;
pub mod shooting;

pub use error::{Error, Result};
