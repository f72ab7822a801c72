use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffusion::{vp_schedule, ChainNoise, DiffusionPolicy};
use crate::error::Result;
use crate::gaussian::GaussianPolicy;
use crate::nn::{BoundMlp, Mlp, Tape, Var};
use crate::pruning::MaskSet;
use crate::sac::config::{TrainerConfig, Variant};

/// Policy network of any variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Actor {
    Diffusion(DiffusionPolicy),
    Gaussian(GaussianPolicy),
}

impl Actor {
    pub fn for_config<R: Rng + ?Sized>(cfg: &TrainerConfig, state_dim: usize, action_dim: usize, rng: &mut R) -> Result<Self> {
        Ok(match cfg.variant {
            Variant::Edmsac | Variant::Dmsac => {
                let schedule = vp_schedule(cfg.diffusion_steps, cfg.eps_min, cfg.eps_max)?;
                Actor::Diffusion(DiffusionPolicy::new(
                    state_dim,
                    action_dim,
                    cfg.actor_hidden.clone(),
                    cfg.embed_width,
                    schedule,
                    cfg.denoiser_target,
                    rng,
                )?)
            }
            Variant::Gsac => Actor::Gaussian(GaussianPolicy::new(state_dim, action_dim, cfg.actor_hidden.clone(), rng)?),
        })
    }

    pub fn net(&self) -> &Mlp {
        match self {
            Actor::Diffusion(p) => &p.net,
            Actor::Gaussian(p) => &p.net,
        }
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        match self {
            Actor::Diffusion(p) => &mut p.net,
            Actor::Gaussian(p) => &mut p.net,
        }
    }

    pub fn action_dim(&self) -> usize {
        match self {
            Actor::Diffusion(p) => p.action_dim,
            Actor::Gaussian(p) => p.action_dim,
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            Actor::Diffusion(p) => p.state_dim,
            Actor::Gaussian(p) => p.state_dim,
        }
    }

    /// Actions for a batch. Deterministic mode still draws the diffusion
    /// start point from `rng` but adds no step noise; the Gaussian actor
    /// returns `tanh(mean)`.
    pub fn act<R: Rng + ?Sized>(
        &self,
        states: &Array2<f64>,
        rng: &mut R,
        deterministic: bool,
        masks: Option<&MaskSet>,
    ) -> Result<Array2<f64>> {
        match self {
            Actor::Diffusion(p) => {
                let noise = ChainNoise::draw(rng, states.nrows(), p.action_dim, p.steps(), deterministic);
                p.sample_batch(states, &noise, masks, None)
            }
            Actor::Gaussian(p) => {
                if deterministic {
                    p.act(states, None)
                } else {
                    let n = p.draw_noise(rng, states.nrows());
                    p.act(states, Some(&n))
                }
            }
        }
    }

    /// Approximate log-density of given actions.
    pub fn log_prob(
        &self,
        states: &Array2<f64>,
        actions: &Array2<f64>,
        masks: Option<&MaskSet>,
    ) -> Result<Vec<f64>> {
        match self {
            Actor::Diffusion(p) => p.log_prob_approx(states, actions, masks),
            Actor::Gaussian(p) => {
                // Invert the squash to recover the Gaussian noise.
                let out = p.net.forward(states, None)?;
                let d = p.action_dim;
                let mut lp = Vec::with_capacity(states.nrows());
                for (row, a) in out.outer_iter().zip(actions.outer_iter()) {
                    let mut s = 0.0;
                    for j in 0..d {
                        let ls = row[d + j].clamp(crate::gaussian::LOG_STD_MIN, crate::gaussian::LOG_STD_MAX);
                        let x = a[j].clamp(-1.0 + 1e-9, 1.0 - 1e-9);
                        let e = (x.atanh() - row[j]) / ls.exp();
                        s += -0.5 * e * e - ls - 0.5 * (2.0 * std::f64::consts::PI).ln() - (1.0 - x * x + 1e-6).ln();
                    }
                    lp.push(s);
                }
                Ok(lp)
            }
        }
    }

    /// Reparameterised sample on a tape. The log-probability column is only
    /// built when `with_log_prob` is set.
    pub fn sample_tape<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        bound: &BoundMlp,
        states: Var,
        rng: &mut R,
        masks: Option<&MaskSet>,
        with_log_prob: bool,
    ) -> Result<(Var, Option<Var>)> {
        let n = tape.value(states).nrows();
        match self {
            Actor::Diffusion(p) => {
                let noise = ChainNoise::draw(rng, n, p.action_dim, p.steps(), false);
                let a = p.sample_tape(tape, bound, states, &noise, masks);
                if !with_log_prob {
                    return Ok((a, None));
                }
                // Gaussian around the detached chain mean.
                let s = tape.value(states).clone();
                let mu = p.mean_action(&s, masks)?;
                let var = p.schedule.zeta(1);
                let d = p.action_dim as f64;
                let neg_mu = tape.constant(-&mu);
                let diff = tape.add(a, neg_mu);
                let sq = tape.square(diff);
                let quad = tape.sum_cols(sq);
                let scaled = tape.scale(quad, -0.5 / var);
                let consts = mu
                    .outer_iter()
                    .map(|m| {
                        -0.5 * d * (2.0 * std::f64::consts::PI * var).ln()
                            - m.iter().map(|y| (1.0 - y * y + 1e-6).ln()).sum::<f64>()
                    })
                    .collect::<Vec<_>>();
                let c = Array2::from_shape_vec((n, 1), consts).expect("one per row");
                Ok((a, Some(tape.add_const(scaled, c))))
            }
            Actor::Gaussian(p) => {
                let noise = p.draw_noise(rng, n);
                let (a, lp) = p.sample_tape(tape, bound, states, &noise);
                Ok((a, with_log_prob.then_some(lp)))
            }
        }
    }
}
