use serde::{Deserialize, Serialize};

use crate::diffusion::DenoiserTarget;
use crate::error::{LearnError, Result};

/// Training algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Diffusion actor with dynamic structured pruning.
    Edmsac,
    /// Diffusion actor without pruning.
    Dmsac,
    /// Tanh-squashed Gaussian actor.
    Gsac,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Edmsac => "edmsac",
            Variant::Dmsac => "dmsac",
            Variant::Gsac => "gsac",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "edmsac" => Ok(Variant::Edmsac),
            "dmsac" => Ok(Variant::Dmsac),
            "gsac" => Ok(Variant::Gsac),
            other => Err(format!("unknown variant {other:?} (expected edmsac, dmsac or gsac)")),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerConfig {
    pub variant: Variant,
    pub seed: u64,
    pub gamma: f64,
    pub tau: f64,
    /// Entropy temperature.
    pub kappa: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Training steps `V`.
    pub steps: usize,
    /// Transitions collected per step `Z`.
    pub transitions_per_step: usize,
    pub prune_rate: f64,
    pub diffusion_steps: usize,
    pub eps_min: f64,
    pub eps_max: f64,
    pub embed_width: usize,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub denoiser_target: DenoiserTarget,
    /// Multiplies rewards before critic regression.
    pub reward_scale: f64,
    /// Steps that act uniformly at random before the actor takes over.
    pub warmup_steps: usize,
    pub log_interval: usize,
    pub eval_states: usize,
    pub eval_seed: u64,
    /// Use `-E[Q + kappa log pi]` as the actor loss instead of
    /// `E[kappa log pi - Q]`.
    pub flip_entropy_sign: bool,
}

impl TrainerConfig {
    /// Full-scale settings with wide networks and very small learning rates.
    pub fn reference() -> Self {
        Self {
            variant: Variant::Edmsac,
            seed: 0,
            gamma: 0.99,
            tau: 0.005,
            kappa: 0.05,
            actor_lr: 2e-7,
            critic_lr: 2e-6,
            weight_decay: 1e-4,
            batch_size: 256,
            buffer_capacity: 100_000,
            steps: 5000,
            transitions_per_step: 1,
            prune_rate: 0.5,
            diffusion_steps: 6,
            eps_min: 0.1,
            eps_max: 10.0,
            embed_width: 16,
            actor_hidden: vec![256, 256],
            critic_hidden: vec![256, 256],
            denoiser_target: DenoiserTarget::Action,
            reward_scale: 0.01,
            warmup_steps: 0,
            log_interval: 50,
            eval_states: 32,
            eval_seed: 7_777,
            flip_entropy_sign: false,
        }
    }

    /// Smaller networks and larger steps sized for a single CPU core.
    pub fn desk() -> Self {
        Self {
            actor_lr: 1e-3,
            critic_lr: 3e-3,
            batch_size: 64,
            actor_hidden: vec![64, 64],
            critic_hidden: vec![64, 64],
            warmup_steps: 200,
            ..Self::reference()
        }
    }

    /// Pruning rate actually used: zero unless the variant prunes.
    pub fn effective_prune_rate(&self) -> f64 {
        match self.variant {
            Variant::Edmsac => self.prune_rate,
            Variant::Dmsac | Variant::Gsac => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(LearnError::Config(m.into()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if !(self.kappa >= 0.0) {
            return bad("kappa must be non-negative");
        }
        if !(self.actor_lr >= 0.0 && self.critic_lr >= 0.0 && self.weight_decay >= 0.0) {
            return bad("learning rates and weight decay must be non-negative");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.transitions_per_step == 0 {
            return bad("batch size, buffer capacity and transitions per step must be positive");
        }
        if !(0.0..1.0).contains(&self.prune_rate) {
            return bad("prune_rate must lie in [0, 1)");
        }
        if self.diffusion_steps == 0 {
            return bad("diffusion_steps must be positive");
        }
        if self.log_interval == 0 || self.eval_states == 0 {
            return bad("log_interval and eval_states must be positive");
        }
        if !(self.reward_scale > 0.0) {
            return bad("reward_scale must be positive");
        }
        Ok(())
    }
}
