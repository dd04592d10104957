//! Numerical laboratory for dichotomy spectra of random dynamical systems and
//! the stochastic pitchfork `dx = (alpha x - x^3) dt + sigma dW`.

pub mod cocycle;
pub mod conjugacy;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod noise;
pub mod numeric;
pub mod pitchfork;
pub mod linalg;
pub mod quadrature;
pub mod rotation_tower;
pub mod spectrum;
pub mod stationary;

pub use error::{Error, Result};
