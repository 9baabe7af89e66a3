//! Numerical models of a compact non-Kahler complex surface fibred over the
//! Riemann sphere, and of the smooth fibration `S^4 -> S^2` it is built from.

pub mod atlas;
pub mod dd;
pub mod error;
pub mod monodromy;
pub mod numerics;
pub mod quotient;
pub mod sphere;
pub mod transition;
pub mod verify;
pub mod weierstrass;

pub use error::{GeomError, Result};
pub use numerics::{Cx, ModuliParams};
