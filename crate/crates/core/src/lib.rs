//! Stochastic chemical kinetics: direct integration of the chemical master
//! equation on a truncated state space, moment-closure ODEs and
//! maximum-entropy reconstruction of marginal distributions.

pub mod direct;
pub mod distribution;
pub mod harness;
pub mod maxent;
pub mod moments;
pub mod network;
pub mod ode;

pub use direct::{integrate, SparseDistribution, TruncationConfig};
pub use distribution::DiscreteDistribution;
pub use network::{parse_network, ReactionNetwork, StateVector};
