//! Tanh-squashed Gaussian actor used by the Gaussian-SAC baseline.

use ndarray::{s, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LearnError, Result};
use crate::nn::{Activation, BoundMlp, Mlp, MlpSpec, Tape, Var};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    /// Outputs `[mean, log_std]`, each `action_dim` wide.
    pub net: Mlp,
    pub state_dim: usize,
    pub action_dim: usize,
}

impl GaussianPolicy {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, action_dim: usize, hidden: Vec<usize>, rng: &mut R) -> Result<Self> {
        let spec = MlpSpec {
            input: state_dim,
            hidden,
            output: 2 * action_dim,
            hidden_act: Activation::Mish,
            output_act: Activation::Identity,
        };
        Ok(Self { net: Mlp::new(spec, rng)?, state_dim, action_dim })
    }

    pub fn draw_noise<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Array2<f64> {
        Array2::from_shape_simple_fn((n, self.action_dim), || rng.sample::<f64, _>(StandardNormal))
    }

    /// Actions `tanh(mu + sigma * noise)`; `noise = None` gives `tanh(mu)`.
    pub fn act(&self, states: &Array2<f64>, noise: Option<&Array2<f64>>) -> Result<Array2<f64>> {
        if states.ncols() != self.state_dim {
            return Err(LearnError::Dimension(format!("policy expects {} state features", self.state_dim)));
        }
        let out = self.net.forward(states, None)?;
        let d = self.action_dim;
        let mu = out.slice(s![.., ..d]).to_owned();
        let pre = match noise {
            Some(n) => {
                let std = out.slice(s![.., d..]).mapv(|l| l.clamp(LOG_STD_MIN, LOG_STD_MAX).exp());
                mu + &(std * n)
            }
            None => mu,
        };
        Ok(pre.mapv(f64::tanh))
    }

    /// Reparameterised sample on a tape: `(action, log_prob)` with the
    /// log-probability as an `n x 1` column.
    pub fn sample_tape(&self, tape: &mut Tape, bound: &BoundMlp, states: Var, noise: &Array2<f64>) -> (Var, Var) {
        let d = self.action_dim;
        let out = self.net.forward_tape(tape, bound, states, None);
        let n = tape.value(out).nrows();
        let mu = tape.slice_cols(out, 0, d);
        let ls_raw = tape.slice_cols(out, d, 2 * d);
        let log_std = tape.clip(ls_raw, LOG_STD_MIN, LOG_STD_MAX);
        let std = tape.exp(log_std);
        let eps = tape.constant(noise.clone());
        let spread = tape.mul(std, eps);
        let pre = tape.add(mu, spread);
        let action = tape.tanh(pre);
        // log N(pre; mu, std) = -0.5 eps^2 - log_std - 0.5 ln(2 pi)
        let gauss_const = noise.mapv(|e| -0.5 * e * e - 0.5 * (2.0 * std::f64::consts::PI).ln());
        let neg_ls = tape.scale(log_std, -1.0);
        let gauss = tape.add_const(neg_ls, gauss_const);
        let a2 = tape.square(action);
        let one_minus = tape.scale(a2, -1.0);
        let one_minus = tape.add_const(one_minus, Array2::from_elem((n, d), 1.0 + 1e-6));
        let log_jac = tape.ln(one_minus);
        let neg_jac = tape.scale(log_jac, -1.0);
        let per_dim = tape.add(gauss, neg_jac);
        let logp = tape.sum_cols(per_dim);
        (action, logp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tape_sample_matches_plain_and_log_prob_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = GaussianPolicy::new(4, 2, vec![8], &mut rng).unwrap();
        let states = Array2::from_shape_simple_fn((3, 4), || rng.random_range(-1.0..1.0));
        let noise = p.draw_noise(&mut rng, 3);
        let plain = p.act(&states, Some(&noise)).unwrap();
        let mut t = Tape::new();
        let b = p.net.bind(&mut t);
        let s = t.constant(states.clone());
        let (a, lp) = p.sample_tape(&mut t, &b, s, &noise);
        assert!((t.value(a) - &plain).iter().all(|d| d.abs() < 1e-12));
        let out = p.net.forward(&states, None).unwrap();
        for r in 0..3 {
            let mut want = 0.0;
            for j in 0..2 {
                let ls = out[[r, 2 + j]].clamp(LOG_STD_MIN, LOG_STD_MAX);
                let e = noise[[r, j]];
                let act = plain[[r, j]];
                want += -0.5 * e * e - ls - 0.5 * (2.0 * std::f64::consts::PI).ln() - (1.0 - act * act + 1e-6).ln();
            }
            assert!((t.value(lp)[[r, 0]] - want).abs() < 1e-9);
        }
    }
}
