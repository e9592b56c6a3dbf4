//! Structural-motif inverse reinforcement learning on tabular gridworlds.
//!
//! The pipeline learns a reward-machine skeleton from demonstrations
//! ([`motif`]), augments the demonstrations with machine states, and runs
//! maximum-entropy IRL on the product of the machine and the environment
//! model ([`irl`]). Two observation-only baselines live alongside it.

pub mod expert;
pub mod gridworld;
pub mod harness;
pub mod irl;
pub mod model;
pub mod motif;
pub mod rm;
pub mod rng;

pub use model::{ModelError, TabularModel};
pub use rm::{LabelSet, ProductModel, RewardMachine, RmError, Vocabulary};
