use ndarray::{concatenate, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LearnError, Result};
use crate::nn::{Activation, AdamW, Mlp, MlpSpec, Tape, Var};
use crate::pruning::MaskSet;
use crate::sac::actor::Actor;
use crate::sac::config::TrainerConfig;
use crate::sac::replay::Batch;

/// Anything that scores state-action pairs on a tape without exposing
/// trainable parameters.
pub trait Critic {
    /// `n x 1` values for `n` rows of states and actions.
    fn value_tape(&self, tape: &mut Tape, states: Var, actions: Var) -> Var;
}

/// Twin critics `Q(s, a)` with their optimisers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Critics {
    pub q1: Mlp,
    pub q2: Mlp,
    pub opt1: AdamW,
    pub opt2: AdamW,
}

pub fn critic_spec(state_dim: usize, action_dim: usize, hidden: Vec<usize>) -> MlpSpec {
    MlpSpec {
        input: state_dim + action_dim,
        hidden,
        output: 1,
        hidden_act: Activation::Mish,
        output_act: Activation::Identity,
    }
}

impl Critics {
    pub fn new<R: Rng + ?Sized>(spec: MlpSpec, lr: f64, weight_decay: f64, rng: &mut R) -> Result<Self> {
        let q1 = Mlp::new(spec.clone(), rng)?;
        let q2 = Mlp::new(spec, rng)?;
        Ok(Self { opt1: AdamW::new(&q1, lr, weight_decay), opt2: AdamW::new(&q2, lr, weight_decay), q1, q2 })
    }

    /// Elementwise minimum of both critics, no tape.
    pub fn min_q(&self, states: &Array2<f64>, actions: &Array2<f64>) -> Result<Array2<f64>> {
        let x = concatenate(Axis(1), &[states.view(), actions.view()])
            .map_err(|e| LearnError::Dimension(e.to_string()))?;
        let a = self.q1.forward(&x, None)?;
        let b = self.q2.forward(&x, None)?;
        Ok(ndarray::Zip::from(&a).and(&b).map_collect(|x, y| x.min(*y)))
    }
}

impl Critic for Critics {
    fn value_tape(&self, tape: &mut Tape, states: Var, actions: Var) -> Var {
        let x = tape.concat(&[states, actions]);
        let b1 = self.q1.bind_frozen(tape);
        let b2 = self.q2.bind_frozen(tape);
        let a = self.q1.forward_tape(tape, &b1, x, None);
        let b = self.q2.forward_tape(tape, &b2, x, None);
        tape.min(a, b)
    }
}

/// Frozen pieces used to build the bootstrap target.
pub struct TargetNets<'a> {
    pub q1: &'a Mlp,
    pub q2: &'a Mlp,
    pub actor: &'a Actor,
    pub masks: Option<&'a MaskSet>,
}

fn check_loss(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(LearnError::NonFinite(format!("{what} loss")))
    }
}

/// Regression targets `r + gamma (1 - d) (min Q'(s', a') - kappa log pi(a'|s'))`
/// with scaled rewards; the target actor is only queried for non-terminal rows.
pub fn critic_targets<R: Rng + ?Sized>(
    batch: &Batch,
    targets: &TargetNets<'_>,
    cfg: &TrainerConfig,
    rng: &mut R,
) -> Result<Array2<f64>> {
    let mut y = &batch.rewards * cfg.reward_scale;
    if batch.dones.iter().all(|d| *d) {
        return Ok(y);
    }
    let next_a = targets.actor.act(&batch.next_states, rng, false, targets.masks)?;
    let x = concatenate(Axis(1), &[batch.next_states.view(), next_a.view()])
        .map_err(|e| LearnError::Dimension(e.to_string()))?;
    let q1 = targets.q1.forward(&x, None)?;
    let q2 = targets.q2.forward(&x, None)?;
    let lp = if cfg.kappa > 0.0 {
        targets.actor.log_prob(&batch.next_states, &next_a, targets.masks)?
    } else {
        vec![0.0; batch.dones.len()]
    };
    for (i, done) in batch.dones.iter().enumerate() {
        if !done {
            y[[i, 0]] += cfg.gamma * (q1[[i, 0]].min(q2[[i, 0]]) - cfg.kappa * lp[i]);
        }
    }
    Ok(y)
}

/// One squared-error step of both critics; returns the mean of the two losses.
pub fn critic_update<R: Rng + ?Sized>(
    batch: &Batch,
    critics: &mut Critics,
    targets: &TargetNets<'_>,
    cfg: &TrainerConfig,
    rng: &mut R,
) -> Result<f64> {
    let y = critic_targets(batch, targets, cfg, rng)?;
    let mut tape = Tape::new();
    let s = tape.constant(batch.states.clone());
    let a = tape.constant(batch.actions.clone());
    let x = tape.concat(&[s, a]);
    let yv = tape.constant(-&y);
    let b1 = critics.q1.bind(&mut tape);
    let b2 = critics.q2.bind(&mut tape);
    let mut losses = Vec::with_capacity(2);
    for (net, b) in [(&critics.q1, &b1), (&critics.q2, &b2)] {
        let q = net.forward_tape(&mut tape, b, x, None);
        let d = tape.add(q, yv);
        let sq = tape.square(d);
        losses.push(tape.mean(sq));
    }
    let total = tape.add(losses[0], losses[1]);
    let value = check_loss(tape.value(total)[[0, 0]], "critic")?;
    let grads = tape.backward(total);
    critics.opt1.step(&mut critics.q1, &b1, &grads, None)?;
    critics.opt2.step(&mut critics.q2, &b2, &grads, None)?;
    Ok(value / 2.0)
}

/// One step of the actor on `E[kappa log pi - Q]` (or the alternative sign),
/// with masked rows frozen.
pub fn actor_update<R: Rng + ?Sized, C: Critic>(
    batch: &Batch,
    actor: &mut Actor,
    opt: &mut AdamW,
    critic: &C,
    masks: Option<&MaskSet>,
    cfg: &TrainerConfig,
    rng: &mut R,
) -> Result<f64> {
    let mut tape = Tape::new();
    let s = tape.constant(batch.states.clone());
    let bound = actor.net().bind(&mut tape);
    let use_entropy = cfg.kappa > 0.0;
    let (a, lp) = actor.sample_tape(&mut tape, &bound, s, rng, masks, use_entropy)?;
    let q = critic.value_tape(&mut tape, s, a);
    let per_row = match lp {
        Some(lp) => {
            let k = tape.scale(lp, if cfg.flip_entropy_sign { -cfg.kappa } else { cfg.kappa });
            let nq = tape.scale(q, -1.0);
            tape.add(k, nq)
        }
        None => tape.scale(q, -1.0),
    };
    let loss = tape.mean(per_row);
    let value = check_loss(tape.value(loss)[[0, 0]], "actor")?;
    let grads = tape.backward(loss);
    opt.step(actor.net_mut(), &bound, &grads, masks)?;
    Ok(value)
}

/// `target <- tau * online + (1 - tau) * target`.
pub fn soft_update(online: &Mlp, target: &mut Mlp, tau: f64) -> Result<()> {
    target.soft_update(online, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sac::replay::{ReplayBuffer, Transition};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn batch(n: usize, done: bool, rng: &mut ChaCha8Rng) -> Batch {
        let mut buf = ReplayBuffer::new(64).unwrap();
        for _ in 0..n {
            buf.push(Transition {
                state: (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
                action: (0..2).map(|_| rng.random_range(-1.0..1.0)).collect(),
                next_state: (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
                reward: rng.random_range(-5.0..5.0),
                done,
            })
            .unwrap();
        }
        buf.sample(rng, n).unwrap()
    }

    fn cfg() -> TrainerConfig {
        TrainerConfig {
            actor_hidden: vec![16, 16],
            critic_hidden: vec![16, 16],
            reward_scale: 1.0,
            embed_width: 4,
            ..TrainerConfig::desk()
        }
    }

    #[test]
    fn terminal_targets_are_rewards() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = cfg();
        let actor = Actor::for_config(&c, 3, 2, &mut rng).unwrap();
        let critics = Critics::new(critic_spec(3, 2, vec![8]), 1e-3, 0.0, &mut rng).unwrap();
        let b = batch(8, true, &mut rng);
        let t = TargetNets { q1: &critics.q1, q2: &critics.q2, actor: &actor, masks: None };
        assert_eq!(critic_targets(&b, &t, &c, &mut rng).unwrap(), b.rewards);
        let open = batch(8, false, &mut rng);
        let no_discount = TrainerConfig { gamma: 1e-300, kappa: 0.0, ..c.clone() };
        let y = critic_targets(&open, &t, &no_discount, &mut rng).unwrap();
        assert!((&y - &open.rewards).iter().all(|d| d.abs() < 1e-250));
    }

    #[test]
    fn identical_twins_stay_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = cfg();
        let actor = Actor::for_config(&c, 3, 2, &mut rng).unwrap();
        let mut critics = Critics::new(critic_spec(3, 2, vec![8]), 1e-3, 1e-4, &mut rng).unwrap();
        critics.q2 = critics.q1.clone();
        critics.opt2 = critics.opt1.clone();
        let (t1, t2) = (critics.q1.clone(), critics.q2.clone());
        for _ in 0..20 {
            let b = batch(16, true, &mut rng);
            let t = TargetNets { q1: &t1, q2: &t2, actor: &actor, masks: None };
            critic_update(&b, &mut critics, &t, &c, &mut rng).unwrap();
        }
        assert_eq!(critics.q1, critics.q2);
    }

    struct NegSquare;
    impl Critic for NegSquare {
        fn value_tape(&self, tape: &mut Tape, _states: Var, actions: Var) -> Var {
            let sq = tape.square(actions);
            let s = tape.sum_cols(sq);
            tape.scale(s, -1.0)
        }
    }

    #[test]
    fn actor_moves_toward_the_critic_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = TrainerConfig { kappa: 0.0, actor_lr: 2e-4, ..cfg() };
        let mut actor = Actor::for_config(&c, 3, 2, &mut rng).unwrap();
        let mut opt = AdamW::new(actor.net(), c.actor_lr, 0.0);
        let b = batch(32, true, &mut rng);
        let mut losses = Vec::new();
        for _ in 0..100 {
            let mut fixed = ChaCha8Rng::seed_from_u64(99);
            losses.push(actor_update(&b, &mut actor, &mut opt, &NegSquare, None, &c, &mut fixed).unwrap());
        }
        assert!(losses.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{losses:?}");
        assert!(losses[99] < 0.5 * losses[0]);
    }

    #[test]
    fn zero_rate_and_masks_freeze_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = TrainerConfig { actor_lr: 0.0, ..cfg() };
        let mut actor = Actor::for_config(&c, 3, 2, &mut rng).unwrap();
        let before = actor.clone();
        let mut opt = AdamW::new(actor.net(), 0.0, 1e-4);
        let b = batch(8, true, &mut rng);
        actor_update(&b, &mut actor, &mut opt, &NegSquare, None, &c, &mut rng).unwrap();
        assert_eq!(actor, before);

        let masks = crate::pruning::build_masks(actor.net(), 0.5).unwrap();
        let mut opt = AdamW::new(actor.net(), 1e-2, 1e-2);
        actor_update(&b, &mut actor, &mut opt, &NegSquare, Some(&masks), &c, &mut rng).unwrap();
        for (l, keep) in masks.layers.iter().enumerate() {
            for (r, k) in keep.iter().enumerate() {
                let (now, was) = (&actor.net().layers[l], &before.net().layers[l]);
                let same = now.w.row(r) == was.w.row(r) && now.b[[0, r]] == was.b[[0, r]];
                assert_eq!(same, !k, "layer {l} row {r}");
            }
        }
    }

    #[test]
    fn soft_update_arithmetic() {
        let spec = critic_spec(1, 1, vec![2]);
        let mut online = Mlp::zeros(spec.clone()).unwrap();
        for l in &mut online.layers {
            l.w.fill(1.0);
            l.b.fill(1.0);
        }
        let mut target = Mlp::zeros(spec).unwrap();
        soft_update(&online, &mut target, 0.5).unwrap();
        soft_update(&online, &mut target, 0.5).unwrap();
        assert!(target.layers.iter().all(|l| l.w.iter().chain(l.b.iter()).all(|v| *v == 0.75)));
    }
}
