//! Semantic-aware spectrum sharing for vehicular networks: a Manhattan-grid
//! mobility and channel simulator, a semantic-similarity metric model, and
//! soft actor-critic training with comparison baselines.

pub mod agent;
pub mod approximator;
pub mod baselines;
pub mod channel;
pub mod env;
pub mod error;
pub mod harness;
pub mod mobility;
mod rng;
pub mod sac;
pub mod semantic;

pub use error::{Error, Result};
