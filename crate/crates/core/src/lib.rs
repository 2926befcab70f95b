//! Simulation of endpoint-conditioned Markov jump processes and estimation
//! of their generators from discretely observed data.
//!
//! States are 0-indexed throughout the API. Text formats and error messages
//! use 1-indexed states.

pub mod bench;
pub mod bridge;
pub mod error;
pub mod exec;
pub mod expm;
pub mod generator;
pub mod inference;
pub mod path;
pub mod rng;
pub mod spectral;
pub mod stats;

pub use bridge::{sample_bridge, BridgeProblem, BridgeSample, Method, SamplerOptions, TirMode};
pub use error::{Error, Result};
pub use exec::Execution;
pub use generator::{
    reversed_generator, stationary_distribution, stationary_time, transition_matrix, Generator,
    StationaryTimeOptions, TransitionMatrix,
};
pub use path::{reverse_path, simulate_forward, Path};
pub use rng::{SeedTree, SimRng};
pub use stats::SufficientStats;
