//! Topological Josephson traveling-wave parametric amplifier model: circuit
//! mapping, mean-field pump solution, the linearized non-Hermitian lattice,
//! its topological classification, and amplifier response.

pub mod circuit;
pub mod config;
pub mod dataset;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod meanfield;
pub mod plot;
pub mod preset;
pub mod response;
pub mod sweep;
pub mod topology;
pub mod units;

pub use error::{Error, Result};
