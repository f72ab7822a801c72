//! Soft actor-critic with twin critics and a diffusion, or Gaussian, actor.

pub mod actor;
pub mod config;
pub mod replay;
pub mod trainer;
pub mod updates;

pub use actor::Actor;
pub use config::{TrainerConfig, Variant};
pub use replay::{Batch, ReplayBuffer, Transition};
pub use trainer::{
    derive_rng, eval_states, evaluate, evaluate_checkpoint, feature_matrix, train, Checkpoint, EvalSummary, LogRow,
    MaskLogRow, TrainOutcome,
};
pub use updates::{actor_update, critic_spec, critic_targets, critic_update, soft_update, Critic, Critics, TargetNets};
