//! Fixed points of random permutations and why simulated annealing struggles
//! to match large isomorphic graphs.
//!
//! * [`exact`]: derangement and rencontres numbers, exact fixed-point
//!   probabilities and their large-`n` limits.
//! * [`permutation`]: solution vectors, match-quality metrics and the swap,
//!   insertion, inversion and scramble neighbourhoods.
//! * [`graph`]: random isomorphic graph pairs and matching objectives.
//! * [`anneal`]: a Metropolis annealer with geometric cooling.
//! * [`experiments`]: seeded, reproducible census and success-rate tables.

pub mod anneal;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod graph;
pub mod permutation;

pub use anneal::{
    anneal, anneal_seeded, AnnealConfig, AnnealResult, InitialTemperature, Objective,
};
pub use error::{Error, Result};
pub use exact::ExactProbability;
pub use graph::{generate_pair, GraphPair, RelabelMode};
pub use permutation::{Operator, Permutation};
