//! Coupled functional equations on the plane and first order ODE systems,
//! both solved as fixed points of contractions.

mod coupled;
mod ode;

pub use coupled::*;
pub use ode::*;
