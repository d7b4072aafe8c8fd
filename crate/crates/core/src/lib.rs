//! Numerics for warped-product ends `N x S^k x (a, inf)`: spectra, radial mode
//! equations, the decay and vanishing-gap conditions, Green's function and mass
//! extraction, Yamabe quotients and product curvature.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod conditions;
pub mod curvature;
pub mod error;
pub mod geometry;
pub mod green;
pub(crate) mod linalg;
pub mod ode;
pub mod spectra;
pub mod yamabe;

pub use error::{Error, Result};
