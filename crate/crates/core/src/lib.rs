//! Uplink massive MIMO simulation: multi-cell network layout, pilot-based
//! channel estimation, linear detectors, Monte Carlo spectral efficiency and
//! large-system deterministic equivalents.

pub mod config;
pub mod detectors;
pub mod detequiv;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod geometry;
mod kernel;
pub mod linalg;
pub mod performance;
pub mod rmt;
pub mod pilots;
pub mod results;
pub mod rng;
pub mod validate;

pub use error::{Error, Result};
