//! Ekman boundary layers over a curved bottom: geometry, the 2D limit
//! system, closed-form layer profiles, assembly of the 3D approximate
//! solution and its verification.

pub mod assembler;
pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod io;
pub mod limit2d;
pub mod plot;
pub mod profiles;
pub mod quadrature;
pub mod spectral;
pub mod verify;

pub use error::{Error, ErrorClass, Result};
