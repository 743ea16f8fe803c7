//! Soft Actor-Critic over small MLPs, plus the observation augmentation and
//! the training/evaluation loop.

pub mod adam;
pub mod augment;
pub mod mlp;
pub mod replay;
pub mod sac;
pub mod train;

pub use adam::Adam;
pub use augment::{augment, AugmentedState, EsnAdapter, Frontend};
pub use mlp::{param_count, Activation, Mlp, Tape};
pub use replay::{Batch, ReplayBuffer};
pub use sac::{
    temperature_loss, ActorLoss, CriticLoss, LossReport, SacAgent, SacConfig, SacState,
    LOG_STD_MAX, LOG_STD_MIN,
};
pub use train::{run_episode, train, train_dr, EpisodeLog, EpisodeOptions, Method, TrainOptions};
