//! Echo-state-network online adaptation for reinforcement learning.
//!
//! A fixed random reservoir encodes the observation history, a recursive
//! least squares readout predicts the next observation online, and the
//! prediction is appended to the observation fed to a Soft Actor-Critic
//! policy. Because only the linear readout learns at deployment time, the
//! agent tracks abrupt changes in the dynamics without backpropagation.
//!
//! Module map:
//!
//! - [`numerics`]: dense matrices, seeded RNG, spectral radius.
//! - [`reservoir`]: the echo state network.
//! - [`adapt`]: RLS readout, ridge regression, readout pretraining.
//! - [`envs`]: cart-pole with periodic wind, friction-switch sled.
//! - [`agent`]: MLP with reverse-mode gradients, SAC, training loops.
//! - [`harness`]: run configs, experiments, CSV/JSON outputs.
//! - [`oracles`]: independent reference computations used for verification.

// NaN-rejecting `!(x > 0.0)` checks and index loops over several arrays are intended.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adapt;
pub mod agent;
pub mod envs;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod oracles;
pub mod reservoir;

pub use error::{Error, Result};
