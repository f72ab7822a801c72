use dyncontract_core::mdp::{sample_state, step, ContractEnv, EnvConfig, EnvState, StepDiagnostics};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LearnError, Result};
use crate::nn::{rows_to_array, AdamW, Mlp};
use crate::pruning::{build_masks, compact_export, mask_stats, LayerMaskStats, MaskSet};
use crate::sac::actor::Actor;
use crate::sac::config::{TrainerConfig, Variant};
use crate::sac::replay::{ReplayBuffer, Transition};
use crate::sac::updates::{actor_update, critic_spec, critic_update, soft_update, Critics, TargetNets};

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: usize,
    pub variant: Variant,
    pub seed: u64,
    pub eval_reward_mean: f64,
    pub eval_reward_std: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub masked_fraction: f64,
}

/// Mask statistics of the online actor at a logged step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskLogRow {
    pub step: usize,
    pub layers: Vec<LayerMaskStats>,
}

/// Everything needed to run a trained policy again.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub trainer: TrainerConfig,
    pub env: EnvConfig,
    pub actor: Actor,
    pub masks: Option<MaskSet>,
    pub steps_done: usize,
}

impl Checkpoint {
    pub const KIND: &'static str = "checkpoint";

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        crate::nn::save_json(path, Self::KIND, self)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        crate::nn::load_json(path, Self::KIND)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub log: Vec<LogRow>,
    pub mask_log: Vec<MaskLogRow>,
    /// Per environment step, in collection order.
    pub diagnostics: Vec<StepDiagnostics>,
    /// Target actor with the masks it was evaluated under.
    pub checkpoint: Checkpoint,
    /// The target actor's denoiser with masked rows removed.
    pub compact: Mlp,
    /// Step and reason when training stopped on a non-finite value.
    pub diverged: Option<(usize, String)>,
    pub buffer: ReplayBuffer,
}

/// Mean and spread of step rewards over an evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub mean: f64,
    pub std: f64,
    pub rewards: Vec<f64>,
    pub profits: Vec<f64>,
}

/// Independent stream for one purpose, derived from the run seed.
pub fn derive_rng(seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut z = seed ^ purpose.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

const INIT: u64 = 1;
const ENV: u64 = 2;
const COLLECT: u64 = 3;
const REPLAY: u64 = 4;
const UPDATE: u64 = 5;

/// The frozen evaluation states for a seed.
pub fn eval_states(env: &EnvConfig, n: usize, eval_seed: u64) -> Result<Vec<EnvState>> {
    let mut rng = ChaCha8Rng::seed_from_u64(eval_seed);
    (0..n).map(|_| sample_state(&mut rng, &env.ranges).map_err(LearnError::from)).collect()
}

/// Scores a policy on fixed states with deterministic sampling. The start
/// noise comes from a generator seeded with `eval_seed`, so repeated calls
/// agree.
pub fn evaluate(actor: &Actor, masks: Option<&MaskSet>, states: &[EnvState], env: &EnvConfig, eval_seed: u64) -> Result<EvalSummary> {
    let feats: Vec<Vec<f64>> = states.iter().map(|s| env.ranges.features(s)).collect();
    let x = rows_to_array(&feats);
    let mut rng = ChaCha8Rng::seed_from_u64(eval_seed);
    let actions = actor.act(&x, &mut rng, true, masks)?;
    let mut rewards = Vec::with_capacity(states.len());
    let mut profits = Vec::with_capacity(states.len());
    for (s, a) in states.iter().zip(actions.outer_iter()) {
        let out = step(s, &a.to_vec(), env.lambda, env.mode, env.t_min, env.t_max)?;
        rewards.push(out.reward);
        profits.push(out.profit.total);
    }
    let n = rewards.len().max(1) as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let std = (rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok(EvalSummary { mean, std, rewards, profits })
}

fn masks_for(net: &Mlp, rate: f64) -> Result<Option<MaskSet>> {
    if rate > 0.0 {
        build_masks(net, rate).map(Some)
    } else {
        Ok(None)
    }
}

fn uniform_action<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

struct Run {
    actor: Actor,
    target_actor: Actor,
    actor_opt: AdamW,
    critics: Critics,
    target_q1: Mlp,
    target_q2: Mlp,
    masks: Option<MaskSet>,
    target_masks: Option<MaskSet>,
}

/// Trains one policy. A non-finite value stops the run early; the partial
/// log and the last finite target policy are still returned.
pub fn train(cfg: &TrainerConfig, env_cfg: &EnvConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    env_cfg.ranges.validate()?;
    let state_dim = env_cfg.ranges.feature_dim();
    let action_dim = env_cfg.action_dim();
    let rate = cfg.effective_prune_rate();

    let mut init = derive_rng(cfg.seed, INIT);
    let actor = Actor::for_config(cfg, state_dim, action_dim, &mut init)?;
    let critics = Critics::new(critic_spec(state_dim, action_dim, cfg.critic_hidden.clone()), cfg.critic_lr, cfg.weight_decay, &mut init)?;
    let mut run = Run {
        target_actor: actor.clone(),
        actor_opt: AdamW::new(actor.net(), cfg.actor_lr, cfg.weight_decay),
        target_q1: critics.q1.clone(),
        target_q2: critics.q2.clone(),
        masks: masks_for(actor.net(), rate)?,
        target_masks: masks_for(actor.net(), rate)?,
        actor,
        critics,
    };

    let mut env = ContractEnv::new(env_cfg.clone(), derive_rng(cfg.seed, ENV))?;
    let mut collect_rng = derive_rng(cfg.seed, COLLECT);
    let mut replay_rng = derive_rng(cfg.seed, REPLAY);
    let mut update_rng = derive_rng(cfg.seed, UPDATE);
    let eval_set = eval_states(env_cfg, cfg.eval_states, cfg.eval_seed)?;

    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity)?;
    let mut log = Vec::new();
    let mut mask_log = Vec::new();
    let mut diagnostics = Vec::new();
    let mut diverged = None;
    let (mut actor_sum, mut critic_sum, mut since_log) = (0.0, 0.0, 0usize);

    for v in 1..=cfg.steps {
        let result = (|| -> Result<(f64, f64)> {
            for _ in 0..cfg.transitions_per_step {
                let s = env.state().clone();
                let feats = env_cfg.ranges.features(&s);
                let action = if v <= cfg.warmup_steps {
                    uniform_action(&mut collect_rng, action_dim)
                } else {
                    let x = rows_to_array(std::slice::from_ref(&feats));
                    run.actor.act(&x, &mut collect_rng, false, run.masks.as_ref())?.row(0).to_vec()
                };
                let tr = env.step(&action)?;
                buffer.push(Transition {
                    state: feats,
                    action,
                    next_state: env_cfg.ranges.features(&tr.next_state),
                    reward: tr.outcome.reward,
                    done: tr.done,
                })?;
                diagnostics.push(tr.diagnostics);
            }

            run.masks = masks_for(run.actor.net(), rate)?;
            run.target_masks = masks_for(run.target_actor.net(), rate)?;
            let batch = buffer.sample(&mut replay_rng, cfg.batch_size.min(buffer.len()))?;
            let targets = TargetNets {
                q1: &run.target_q1,
                q2: &run.target_q2,
                actor: &run.target_actor,
                masks: run.target_masks.as_ref(),
            };
            let critic_loss = critic_update(&batch, &mut run.critics, &targets, cfg, &mut update_rng)?;
            let actor_loss = actor_update(
                &batch,
                &mut run.actor,
                &mut run.actor_opt,
                &run.critics,
                run.masks.as_ref(),
                cfg,
                &mut update_rng,
            )?;
            soft_update(run.actor.net(), run.target_actor.net_mut(), cfg.tau)?;
            soft_update(&run.critics.q1, &mut run.target_q1, cfg.tau)?;
            soft_update(&run.critics.q2, &mut run.target_q2, cfg.tau)?;
            if !(run.actor.net().is_finite() && run.critics.q1.is_finite() && run.critics.q2.is_finite()) {
                return Err(LearnError::NonFinite("network parameters".into()));
            }
            Ok((actor_loss, critic_loss))
        })();

        let (a_loss, c_loss) = match result {
            Ok(l) => l,
            Err(LearnError::NonFinite(what)) | Err(LearnError::Diverged { reason: what, .. }) => {
                diverged = Some((v, what));
                break;
            }
            Err(e) => return Err(e),
        };
        actor_sum += a_loss;
        critic_sum += c_loss;
        since_log += 1;

        if v % cfg.log_interval == 0 || v == cfg.steps {
            let summary = evaluate(&run.target_actor, run.target_masks.as_ref(), &eval_set, env_cfg, cfg.eval_seed)?;
            log.push(LogRow {
                step: v,
                variant: cfg.variant,
                seed: cfg.seed,
                eval_reward_mean: summary.mean,
                eval_reward_std: summary.std,
                actor_loss: actor_sum / since_log as f64,
                critic_loss: critic_sum / since_log as f64,
                masked_fraction: run.masks.as_ref().map_or(0.0, MaskSet::masked_fraction),
            });
            let stats_masks = run.masks.clone().unwrap_or_else(|| MaskSet::dense(run.actor.net()));
            mask_log.push(MaskLogRow { step: v, layers: mask_stats(run.actor.net(), &stats_masks) });
            (actor_sum, critic_sum, since_log) = (0.0, 0.0, 0);
        }
    }

    let final_masks = masks_for(run.target_actor.net(), rate)?;
    let dense = final_masks.clone().unwrap_or_else(|| MaskSet::dense(run.target_actor.net()));
    let compact = compact_export(run.target_actor.net(), &dense)?;
    let steps_done = diverged.as_ref().map_or(cfg.steps, |(v, _)| v - 1);
    Ok(TrainOutcome {
        log,
        mask_log,
        diagnostics,
        checkpoint: Checkpoint {
            trainer: cfg.clone(),
            env: env_cfg.clone(),
            actor: run.target_actor,
            masks: final_masks,
            steps_done,
        },
        compact,
        diverged,
        buffer,
    })
}

/// Convenience for callers holding a checkpoint: evaluation on its own
/// frozen state set.
pub fn evaluate_checkpoint(ck: &Checkpoint, states: &[EnvState]) -> Result<EvalSummary> {
    evaluate(&ck.actor, ck.masks.as_ref(), states, &ck.env, ck.trainer.eval_seed)
}

/// Features of many states stacked as rows.
pub fn feature_matrix(env: &EnvConfig, states: &[EnvState]) -> Array2<f64> {
    rows_to_array(&states.iter().map(|s| env.ranges.features(s)).collect::<Vec<_>>())
}
