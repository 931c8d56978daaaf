//! Asymptotic constructions for a fast-rotating viscous fluid in a periodic
//! strip driven by an oscillating surface stress: Ekman layers, Ekman
//! pumping envelopes, correctors, and a per-mode direct solver to check them.

#![allow(clippy::needless_range_loop)]

pub mod boundary_layers;
pub mod correctors;
pub mod direct;
pub mod envelope;
pub mod error;
pub mod exec;
pub mod field;
pub mod harness;
pub mod quad;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub use spectral::{ModeIndex, Params, SpectralField};
