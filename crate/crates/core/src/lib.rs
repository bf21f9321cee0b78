//! Numerical laboratory for mean-field Langevin training of two-layer
//! networks in the μP scaling: particle dynamics, coupling experiments,
//! moment calculus, Hermite dictionaries, symmetry quotients and the
//! four-part error decomposition harness.

pub mod cli;
pub mod dictionary;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod model;
pub mod moments;
pub mod output;
pub mod quotient;
pub mod rng;
pub mod stats;
pub mod transport;

pub use error::{Error, Result};
