//! Ensembles of random autoregressive neural quantum states.
//!
//! Recurrent and transformer wavefunctions, exact and Monte Carlo entanglement
//! estimators, entanglement-spectrum level statistics, and variational Monte Carlo.

pub mod error;
pub mod models;
pub mod numerics;
pub mod observables;
pub mod sampling;
pub mod vmc;
pub mod ensemble;
pub mod appendix;

pub use error::{Error, Result};
