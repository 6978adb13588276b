//! Simulation and planning of multiplexed all-photonic GKP repeater chains.
//!
//! Each repeater holds cube resource states of eight GKP qubits: one outer
//! leaf sent towards the neighbouring station and seven inner leaves kept as
//! a [[7,1,3]] block. A single elementary segment is simulated by Monte Carlo
//! ([`link`]); whole chains are composed analytically ([`rate`]).

pub mod baselines;
pub mod decoder;
pub mod error;
pub mod gkp;
pub mod link;
pub mod planner;
pub mod rate;
pub mod resource;
pub mod stream;

pub use error::{ModelError, Result};
