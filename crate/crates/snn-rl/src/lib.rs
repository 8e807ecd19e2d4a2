//! Spiking actor-critic reinforcement learning with feedback-modulated
//! TD-STDP: LIF populations, exponential trace machinery, TD-error-driven
//! plasticity for critic and actor, a native CartPole environment and a
//! training harness that certifies the learning-rule identities numerically.

pub mod actor;
pub mod agent;
pub mod cartpole;
pub mod critic;
pub mod encoding;
pub mod error;
pub mod harness;
pub mod lif;
pub mod optim;
pub mod profile;
pub mod traces;
pub mod verify;

pub use error::{Result, SnnError};
