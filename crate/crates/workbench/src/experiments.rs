//! Scheme comparisons and parameter sweeps over seeded state sets.

use dyncontract_core::mdp::{EnvConfig, EnvState};
use dyncontract_core::oracle::{grid_search, random_scheme, static_scheme, Solution};
use dyncontract_learn::sac::{derive_rng, eval_states, evaluate, train, TrainOutcome, TrainerConfig, Variant};

use crate::config::Config;
use crate::error::{Error, Result};

/// Seed stream reserved for the random scheme.
const RANDOM_SCHEME: u64 = 100;

/// States a seed stands for in comparisons and sweeps.
pub fn seeded_states(env: &EnvConfig, seed: u64, n: usize) -> Result<Vec<EnvState>> {
    Ok(eval_states(env, n, seed)?)
}

pub fn oracle(cfg: &Config, state: &EnvState) -> Result<Solution> {
    Ok(grid_search(&state.market, &cfg.grid(), cfg.search_mode())?)
}

/// Trains a policy and turns divergence into an error.
pub fn train_checked(trainer: &TrainerConfig, env: &EnvConfig) -> Result<TrainOutcome> {
    let out = train(trainer, env)?;
    match &out.diverged {
        Some((step, reason)) => Err(Error::Diverged { step: *step, reason: reason.clone() }),
        None => Ok(out),
    }
}

/// Penalty-free profit of every state under one scheme.
pub fn scheme_profits(cfg: &Config, scheme: &str, seed: u64, states: &[EnvState]) -> Result<Vec<f64>> {
    let grid = cfg.grid();
    match scheme {
        "dynamic" => states.iter().map(|s| Ok(oracle(cfg, s)?.profit.total)).collect(),
        "static" => states.iter().map(|s| Ok(static_scheme(&s.market, &grid)?.profit.total)).collect(),
        "random" => {
            let mut rng = derive_rng(seed, RANDOM_SCHEME);
            states.iter().map(|s| Ok(random_scheme(&s.market, &grid, &mut rng)?.profit.total)).collect()
        }
        learned => {
            let variant: Variant = learned.parse().map_err(Error::Input)?;
            let trainer = TrainerConfig { variant, seed, ..cfg.trainer.clone() };
            let env = cfg.env_config();
            let out = train_checked(&trainer, &env)?;
            let ck = &out.checkpoint;
            Ok(evaluate(&ck.actor, ck.masks.as_ref(), states, &env, trainer.eval_seed)?.profits)
        }
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len().max(1) as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeRow {
    pub scheme: String,
    pub seed: u64,
    pub mean_profit: f64,
    pub std_profit: f64,
    pub states: usize,
}

/// Every configured scheme on the same states for each seed.
pub fn compare(cfg: &Config, seeds: &[u64], schemes: &[String]) -> Result<Vec<SchemeRow>> {
    let env = cfg.env_config();
    let mut rows = Vec::new();
    for &seed in seeds {
        let states = seeded_states(&env, seed, cfg.experiment.states_per_seed)?;
        for scheme in schemes {
            let profits = scheme_profits(cfg, scheme, seed, &states)?;
            let (mean_profit, std_profit) = mean_std(&profits);
            rows.push(SchemeRow { scheme: scheme.clone(), seed, mean_profit, std_profit, states: states.len() });
        }
    }
    Ok(rows)
}

/// Mean of one scheme across seeds, in the order schemes first appear.
pub fn scheme_means(rows: &[SchemeRow]) -> Vec<(String, f64)> {
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|(s, _)| *s == r.scheme) {
            Some((_, v)) => v.push(r.mean_profit),
            None => out.push((r.scheme.clone(), vec![r.mean_profit])),
        }
    }
    out.into_iter().map(|(s, v)| (s, mean_std(&v).0)).collect()
}

/// Market parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Servers,
    Alpha,
    Beta,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Servers => "n",
            SweepAxis::Alpha => "alpha",
            SweepAxis::Beta => "beta",
        }
    }

    /// The configured values for this axis.
    pub fn default_values(self, cfg: &Config) -> Vec<f64> {
        let ex = &cfg.experiment;
        match self {
            SweepAxis::Servers => ex.sweep_n.iter().map(|n| *n as f64).collect(),
            SweepAxis::Alpha => ex.sweep_alpha.clone(),
            SweepAxis::Beta => ex.sweep_beta.clone(),
        }
    }

    /// Copy of `cfg` with the sampling ranges pinned at `value`.
    pub fn apply(self, cfg: &Config, value: f64) -> Result<Config> {
        let mut c = cfg.clone();
        match self {
            SweepAxis::Servers => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::Input(format!("server counts must be positive integers, got {value}")));
                }
                c.ranges.n_servers = value as usize;
            }
            SweepAxis::Alpha => c.ranges.alpha_choices = vec![value],
            SweepAxis::Beta => c.ranges.beta = value,
        }
        c.state_ranges().validate().map_err(|e| Error::Input(format!("sweep value {value}: {e}")))?;
        Ok(c)
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "n" | "servers" => Ok(SweepAxis::Servers),
            "alpha" => Ok(SweepAxis::Alpha),
            "beta" => Ok(SweepAxis::Beta),
            other => Err(format!("unknown sweep axis {other:?} (expected n, alpha or beta)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub seed: u64,
    pub mean_profit: f64,
}

/// Oracle profit per value and seed. Each seed uses the same generator
/// for every value, so the states differ only along the swept axis.
pub fn sweep(cfg: &Config, axis: SweepAxis, values: &[f64], seeds: &[u64]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &seed in seeds {
        for &value in values {
            let c = axis.apply(cfg, value)?;
            let states = seeded_states(&c.env_config(), seed, c.experiment.states_per_seed)?;
            let profits = scheme_profits(&c, "dynamic", seed, &states)?;
            rows.push(SweepRow { axis, value, seed, mean_profit: mean_std(&profits).0 });
        }
    }
    Ok(rows)
}

/// True when profit never drops along the sweep for any seed.
pub fn non_decreasing_per_seed(rows: &[SweepRow], tol: f64) -> bool {
    let mut seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
    seeds.dedup();
    seeds.iter().all(|s| {
        let mut pts: Vec<&SweepRow> = rows.iter().filter(|r| r.seed == *s).collect();
        pts.sort_by(|a, b| a.value.total_cmp(&b.value));
        pts.windows(2).all(|w| w[1].mean_profit >= w[0].mean_profit - tol * w[0].mean_profit.abs().max(1.0))
    })
}
