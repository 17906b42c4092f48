//! Reduced-rank channel estimation for single-carrier massive MIMO with
//! statistical pre-beamforming.
//!
//! The crate models grouped users whose multipath components arrive over
//! angular sectors, designs N × D beamspace matrices (generalized
//! eigenbeams or dominant-eigenvector beams), builds linear estimators on
//! the compressed training observation and evaluates them in closed form
//! and by Monte Carlo simulation.

pub mod array_channel;
pub mod beamspace;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod instances;
pub mod interference;
pub mod linalg;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod sweep;
pub mod training;

pub use error::{Error, Result};
