//! Conditional denoising-diffusion actor.
//!
//! The reverse step is
//! `x_{m-1} = x_m / sqrt(chi_m) - zeta_m / sqrt(chi_m (1 - chibar_m)) * eps_hat + sqrt(zeta_m) xi`
//! with `xi = 0` at `m = 1` and `zeta_m = eps_m`, `chi_m = 1 - eps_m`.
//! The tanh-bounded network head either is `eps_hat` itself
//! ([`DenoiserTarget::Noise`]) or a clean-action estimate `x0_hat` from which
//! `eps_hat = (x_m - sqrt(chibar_m) x0_hat) / sqrt(1 - chibar_m)` follows
//! ([`DenoiserTarget::Action`]); the latter rewrites the same step as
//! `c1 x0_hat + c2 x_m + sqrt(zeta_m) xi`.

use ndarray::{concatenate, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LearnError, Result};
use crate::nn::{sinusoidal_embed, Activation, BoundMlp, Mlp, MlpSpec, Tape, Var};
use crate::pruning::MaskSet;

/// Variance schedule `eps_1..eps_M` with derived `chi` and cumulative `chibar`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub eps: Vec<f64>,
    pub chi: Vec<f64>,
    pub chi_bar: Vec<f64>,
}

/// `chibar_M` above this leaves visible signal at the start of the chain.
pub const RESIDUAL_SIGNAL_WARN: f64 = 0.2;

impl NoiseSchedule {
    pub fn steps(&self) -> usize {
        self.eps.len()
    }

    /// `zeta_m = eps_m`, one-based.
    pub fn zeta(&self, m: usize) -> f64 {
        self.eps[m - 1]
    }

    pub fn chi(&self, m: usize) -> f64 {
        self.chi[m - 1]
    }

    /// One-based with `chibar_0 = 1`.
    pub fn chi_bar(&self, m: usize) -> f64 {
        if m == 0 {
            1.0
        } else {
            self.chi_bar[m - 1]
        }
    }

    /// True when `chibar_M` is small enough for the chain to start from noise.
    pub fn forgets_signal(&self) -> bool {
        self.chi_bar(self.steps()) <= RESIDUAL_SIGNAL_WARN
    }
}

/// `eps_m = 1 - exp(-eps_min / M - (2m - 1) / (2 M^2) (eps_max - eps_min))`.
pub fn vp_schedule(m: usize, eps_min: f64, eps_max: f64) -> Result<NoiseSchedule> {
    if m == 0 {
        return Err(LearnError::Config("diffusion needs at least one step".into()));
    }
    if !(eps_min > 0.0 && eps_min <= eps_max && eps_max.is_finite()) {
        return Err(LearnError::Config(format!("need 0 < eps_min <= eps_max, got {eps_min}, {eps_max}")));
    }
    let mf = m as f64;
    let eps: Vec<f64> = (1..=m)
        .map(|i| 1.0 - (-eps_min / mf - (2.0 * i as f64 - 1.0) / (2.0 * mf * mf) * (eps_max - eps_min)).exp())
        .collect();
    let chi: Vec<f64> = eps.iter().map(|e| 1.0 - e).collect();
    let mut acc = 1.0;
    let chi_bar = chi
        .iter()
        .map(|c| {
            acc *= c;
            acc
        })
        .collect();
    Ok(NoiseSchedule { eps, chi, chi_bar })
}

/// What the tanh head of the denoiser estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DenoiserTarget {
    /// The clean action; the update stays bounded.
    #[default]
    Action,
    /// The injected noise, plugged into the step literally.
    Noise,
}

/// Gaussian draws for one batch through the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainNoise {
    /// Starting point `x_M`.
    pub start: Array2<f64>,
    /// `xi` for `m = M, M-1, ..., 2`; empty when deterministic.
    pub xi: Vec<Array2<f64>>,
}

impl ChainNoise {
    /// Draws `x_M` and, unless `deterministic`, every `xi`.
    pub fn draw<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize, steps: usize, deterministic: bool) -> Self {
        let normal = |rng: &mut R| Array2::from_shape_simple_fn((n, d), || rng.sample::<f64, _>(StandardNormal));
        let start = normal(rng);
        let xi = if deterministic { Vec::new() } else { (2..=steps).rev().map(|_| normal(rng)).collect() };
        Self { start, xi }
    }

    /// Zero start and no step noise.
    pub fn zeros(n: usize, d: usize) -> Self {
        Self { start: Array2::zeros((n, d)), xi: Vec::new() }
    }

    fn xi_for(&self, m: usize, steps: usize) -> Option<&Array2<f64>> {
        if m <= 1 {
            return None;
        }
        self.xi.get(steps - m)
    }
}

/// State- and step-conditioned denoiser together with its schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionPolicy {
    pub schedule: NoiseSchedule,
    pub net: Mlp,
    pub state_dim: usize,
    pub action_dim: usize,
    pub embed_width: usize,
    pub target: DenoiserTarget,
}

impl DiffusionPolicy {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        hidden: Vec<usize>,
        embed_width: usize,
        schedule: NoiseSchedule,
        target: DenoiserTarget,
        rng: &mut R,
    ) -> Result<Self> {
        sinusoidal_embed(0, embed_width)?;
        let spec = MlpSpec {
            input: action_dim + state_dim + embed_width,
            hidden,
            output: action_dim,
            hidden_act: Activation::Mish,
            output_act: Activation::Tanh,
        };
        Ok(Self { schedule, net: Mlp::new(spec, rng)?, state_dim, action_dim, embed_width, target })
    }

    pub fn steps(&self) -> usize {
        self.schedule.steps()
    }

    fn embed(&self, m: usize, n: usize) -> Array2<f64> {
        let e = sinusoidal_embed(m, self.embed_width).expect("width checked at construction");
        Array2::from_shape_fn((n, e.len()), |(_, j)| e[j])
    }

    /// Coefficients `(on head, on x_m)` of the step at `m`.
    fn coeffs(&self, m: usize) -> (f64, f64) {
        let s = &self.schedule;
        let (zeta, chi, cb, cb_prev) = (s.zeta(m), s.chi(m), s.chi_bar(m), s.chi_bar(m - 1));
        match self.target {
            DenoiserTarget::Action => (cb_prev.sqrt() * zeta / (1.0 - cb), chi.sqrt() * (1.0 - cb_prev) / (1.0 - cb)),
            DenoiserTarget::Noise => (-zeta / (chi * (1.0 - cb)).sqrt(), 1.0 / chi.sqrt()),
        }
    }

    fn check_states(&self, states: &Array2<f64>, noise: &ChainNoise) -> Result<()> {
        if states.ncols() != self.state_dim {
            return Err(LearnError::Dimension(format!(
                "policy expects {} state features, got {}",
                self.state_dim,
                states.ncols()
            )));
        }
        if noise.start.dim() != (states.nrows(), self.action_dim) {
            return Err(LearnError::Dimension("chain noise does not match the batch".into()));
        }
        Ok(())
    }

    /// Runs the reverse chain for a batch of states; returns actions in
    /// `[-1, 1]` and, if `trace` is set, every intermediate `x_m`.
    pub fn sample_batch(
        &self,
        states: &Array2<f64>,
        noise: &ChainNoise,
        masks: Option<&MaskSet>,
        mut trace: Option<&mut Vec<Array2<f64>>>,
    ) -> Result<Array2<f64>> {
        self.check_states(states, noise)?;
        let n = states.nrows();
        let steps = self.steps();
        let mut x = noise.start.clone();
        for m in (1..=steps).rev() {
            let inp = concatenate(Axis(1), &[x.view(), states.view(), self.embed(m, n).view()]).expect("equal rows");
            let head = self.net.forward(&inp, masks)?;
            let (c_head, c_x) = self.coeffs(m);
            let mut next = &head * c_head + &x * c_x;
            if let Some(xi) = noise.xi_for(m, steps) {
                next += &(xi * self.schedule.zeta(m).sqrt());
            }
            if next.iter().any(|v| !v.is_finite()) {
                return Err(LearnError::NonFinite(format!("reverse chain value at step {m}")));
            }
            if let Some(t) = trace.as_deref_mut() {
                t.push(next.clone());
            }
            x = next;
        }
        Ok(x.mapv(|v| v.clamp(-1.0, 1.0)))
    }

    /// Same chain recorded on a tape, differentiable in the bound parameters.
    pub fn sample_tape(
        &self,
        tape: &mut Tape,
        bound: &BoundMlp,
        states: Var,
        noise: &ChainNoise,
        masks: Option<&MaskSet>,
    ) -> Var {
        let n = tape.value(states).nrows();
        let steps = self.steps();
        let mut x = tape.constant(noise.start.clone());
        for m in (1..=steps).rev() {
            let emb = tape.constant(self.embed(m, n));
            let inp = tape.concat(&[x, states, emb]);
            let head = self.net.forward_tape(tape, bound, inp, masks);
            let (c_head, c_x) = self.coeffs(m);
            let a = tape.scale(head, c_head);
            let b = tape.scale(x, c_x);
            let mut next = tape.add(a, b);
            if let Some(xi) = noise.xi_for(m, steps) {
                next = tape.add_const(next, xi * self.schedule.zeta(m).sqrt());
            }
            x = next;
        }
        tape.clip(x, -1.0, 1.0)
    }

    /// One action for one state plus the chain trace.
    pub fn sample_action<R: Rng + ?Sized>(
        &self,
        state: &[f64],
        rng: &mut R,
        deterministic: bool,
        masks: Option<&MaskSet>,
    ) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let s = Array2::from_shape_vec((1, state.len()), state.to_vec())
            .map_err(|e| LearnError::Dimension(e.to_string()))?;
        let noise = ChainNoise::draw(rng, 1, self.action_dim, self.steps(), deterministic);
        let mut trace = Vec::new();
        let a = self.sample_batch(&s, &noise, masks, Some(&mut trace))?;
        Ok((a.row(0).to_vec(), trace.iter().map(|t| t.row(0).to_vec()).collect()))
    }

    /// Centre of the entropy approximation: the chain run from `x_M = 0`
    /// with no step noise.
    pub fn mean_action(&self, states: &Array2<f64>, masks: Option<&MaskSet>) -> Result<Array2<f64>> {
        self.sample_batch(states, &ChainNoise::zeros(states.nrows(), self.action_dim), masks, None)
    }

    /// Approximate log-density of `actions`: Gaussian around
    /// [`DiffusionPolicy::mean_action`] with the first step's variance, plus
    /// the tanh squash correction at the centre.
    pub fn log_prob_approx(&self, states: &Array2<f64>, actions: &Array2<f64>, masks: Option<&MaskSet>) -> Result<Vec<f64>> {
        let mu = self.mean_action(states, masks)?;
        Ok(log_prob_rows(actions, &mu, self.schedule.zeta(1)))
    }
}

/// `log N(a; mu, var I) - sum log(1 - mu^2 + 1e-6)` row by row.
pub fn log_prob_rows(actions: &Array2<f64>, mu: &Array2<f64>, var: f64) -> Vec<f64> {
    let d = actions.ncols() as f64;
    let norm = -0.5 * d * (2.0 * std::f64::consts::PI * var).ln();
    actions
        .outer_iter()
        .zip(mu.outer_iter())
        .map(|(a, m)| {
            let quad: f64 = a.iter().zip(m.iter()).map(|(x, y)| (x - y).powi(2)).sum();
            let squash: f64 = m.iter().map(|y| (1.0 - y * y + 1e-6).ln()).sum();
            norm - 0.5 * quad / var - squash
        })
        .collect()
}
