//! The contract problem as a sequential decision process: sampled markets as
//! states, raw vectors in `[-1, 1]` as actions, penalised profit as reward.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::contract::{closed_form_unchecked, profit_unchecked, MarketState, ProfitBreakdown, TwoPeriodContract, TypeLadder};
use crate::econ::{cost_coeffs, EdgeProfile, QualityHyper};
use crate::error::{ContractError, Result};
use crate::oracle::make_feasible_rounds;

/// Sampling ranges for market states. Intervals are `[lo, hi]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRanges {
    pub k: usize,
    pub n_servers: usize,
    pub beta: f64,
    pub theta: [f64; 2],
    pub sigma: [f64; 2],
    pub rate_mbps: [f64; 2],
    pub power_dbm: [f64; 2],
    pub e_cloud: [f64; 2],
    pub alpha_choices: Vec<f64>,
    /// Concentration of the symmetric Dirichlet behind every probability block.
    pub dirichlet: f64,
    /// Fields not listed above are taken from this profile.
    pub profile: EdgeProfile,
    pub hyper: QualityHyper,
}

impl Default for StateRanges {
    fn default() -> Self {
        Self {
            k: 2,
            n_servers: 3,
            beta: 0.5,
            theta: [15.0, 25.0],
            sigma: [0.5, 1.0],
            rate_mbps: [1.0, 3.0],
            power_dbm: [20.0, 33.0],
            e_cloud: [20.0, 25.0],
            alpha_choices: vec![200.0, 250.0],
            dirichlet: 1.0,
            profile: EdgeProfile::default(),
            hyper: QualityHyper::default(),
        }
    }
}

impl StateRanges {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ContractError::InvalidMarket(m));
        if self.k == 0 || self.n_servers == 0 {
            return bad("k and n_servers must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta must lie in [0, 1], got {}", self.beta));
        }
        for (name, [lo, hi]) in [
            ("theta", self.theta),
            ("sigma", self.sigma),
            ("rate_mbps", self.rate_mbps),
            ("power_dbm", self.power_dbm),
            ("e_cloud", self.e_cloud),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return bad(format!("{name} range [{lo}, {hi}] is empty"));
            }
        }
        if self.theta[0] <= 0.0 || self.theta[0] >= self.theta[1] {
            return bad("theta range must be positive with lo < hi".into());
        }
        if self.alpha_choices.is_empty() || self.alpha_choices.iter().any(|a| !(*a >= 0.0)) {
            return bad("alpha_choices must be non-empty and non-negative".into());
        }
        if !(self.dirichlet > 0.0) {
            return bad("dirichlet concentration must be positive".into());
        }
        self.hyper.validate()
    }

    /// Length of the flattened state vector.
    pub fn state_dim(&self) -> usize {
        state_dim(self.k)
    }

    /// Width of the policy input: the normalised state vector followed by
    /// `alpha` and `beta`.
    pub fn feature_dim(&self) -> usize {
        self.state_dim() + 2
    }

    /// Network input for a state: every entry mapped to roughly `[-1, 1]`
    /// using these ranges, then the cloud's `alpha` and `beta` appended.
    pub fn features(&self, s: &EnvState) -> Vec<f64> {
        let k = s.market.k();
        let scale = |x: f64, [lo, hi]: [f64; 2]| {
            if hi > lo {
                2.0 * (x - lo) / (hi - lo) - 1.0
            } else {
                0.0
            }
        };
        let v = &s.vector;
        let mut out = Vec::with_capacity(v.len() + 2);
        out.push(v[0] / self.n_servers.max(1) as f64 - 1.0);
        out.push(v[1] / self.k.max(1) as f64 - 1.0);
        out.push(scale(v[2], self.sigma));
        out.push(scale(v[3], self.power_dbm));
        out.push(scale(v[4], self.rate_mbps));
        out.push(scale(v[5], self.e_cloud));
        let mut idx = 6;
        for block in [k, k, k, k * k] {
            let is_theta = idx >= 6 + k && idx < 6 + 3 * k;
            for x in &v[idx..idx + block] {
                out.push(if is_theta { scale(*x, self.theta) } else { 2.0 * x - 1.0 });
            }
            idx += block;
        }
        let (amin, amax) = self
            .alpha_choices
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
        out.push(scale(s.market.alpha, [amin, amax]));
        out.push(2.0 * s.market.beta - 1.0);
        out
    }
}

pub fn state_dim(k: usize) -> usize {
    6 + 3 * k + k * k
}

/// A sampled market with the profile it came from and its flattened vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub market: MarketState,
    pub profile: EdgeProfile,
    /// `N, K, sigma, P, r (Mbps), E_C, p1, theta1, theta2, p2` (row-major).
    pub vector: Vec<f64>,
}

impl EnvState {
    pub fn new(market: MarketState, profile: EdgeProfile) -> Result<Self> {
        market.validate()?;
        let vector = flatten(&market, &profile);
        Ok(Self { market, profile, vector })
    }

    /// FNV-1a hash of the state vector bits.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for x in &self.vector {
            for b in x.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

fn flatten(m: &MarketState, profile: &EdgeProfile) -> Vec<f64> {
    let k = m.k();
    let lad = &m.ladder;
    let mut v = Vec::with_capacity(state_dim(k));
    v.extend([
        m.n_servers as f64,
        k as f64,
        m.sigma,
        profile.tx_power_dbm,
        profile.link_rate_bps / 1e6,
        m.e_cloud,
    ]);
    v.extend(&lad.p1);
    v.extend(&lad.theta1);
    v.extend(&lad.theta2);
    v.extend(lad.p2.iter().flatten());
    v
}

fn dirichlet<R: Rng + ?Sized>(rng: &mut R, k: usize, conc: f64) -> Vec<f64> {
    let g = Gamma::new(conc, 1.0).expect("positive concentration");
    loop {
        let x: Vec<f64> = (0..k).map(|_| g.sample(rng)).collect();
        let s: f64 = x.iter().sum();
        if s > 0.0 && s.is_finite() {
            let mut p: Vec<f64> = x.iter().map(|v| v / s).collect();
            let head: f64 = p[..k - 1].iter().sum();
            p[k - 1] = (1.0 - head).max(0.0);
            return p;
        }
    }
}

/// Transition rows ordered by first-order stochastic dominance: the
/// cumulative distributions are sorted column by column so that higher
/// first-period types have pointwise smaller CDFs.
fn dominance_sorted_rows<R: Rng + ?Sized>(rng: &mut R, k: usize, conc: f64) -> Vec<Vec<f64>> {
    let rows: Vec<Vec<f64>> = (0..k).map(|_| dirichlet(rng, k, conc)).collect();
    let mut cdf: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let mut acc = 0.0;
            r[..k - 1].iter().map(|p| {
                acc += p;
                acc.min(1.0)
            }).collect()
        })
        .collect();
    for j in 0..k.saturating_sub(1) {
        let mut col: Vec<f64> = cdf.iter().map(|r| r[j]).collect();
        col.sort_by(|a, b| b.total_cmp(a));
        for (r, v) in col.into_iter().enumerate() {
            cdf[r][j] = v;
        }
    }
    cdf.into_iter()
        .map(|c| {
            let mut p = Vec::with_capacity(k);
            let mut prev = 0.0;
            for v in c {
                p.push(v - prev);
                prev = v;
            }
            p.push(1.0 - prev);
            p
        })
        .collect()
}

/// `k` strictly ascending types, one from each of `k` equal blocks of `range`.
fn type_blocks<R: Rng + ?Sized>(rng: &mut R, k: usize, [lo, hi]: [f64; 2]) -> Vec<f64> {
    let w = (hi - lo) / k as f64;
    let mut th: Vec<f64> = (0..k)
        .map(|i| {
            let a = lo + w * i as f64;
            rng.random_range(a..a + w)
        })
        .collect();
    for i in 1..k {
        if th[i] <= th[i - 1] {
            th[i] = th[i - 1] + 1e-6;
        }
    }
    th
}

/// Draws one market. Deterministic given the generator state.
pub fn sample_state<R: Rng + ?Sized>(rng: &mut R, ranges: &StateRanges) -> Result<EnvState> {
    ranges.validate()?;
    let k = ranges.k;
    let uni = |rng: &mut R, [lo, hi]: [f64; 2]| if hi > lo { rng.random_range(lo..hi) } else { lo };
    let sigma = uni(rng, ranges.sigma);
    let rate = uni(rng, ranges.rate_mbps);
    let power = uni(rng, ranges.power_dbm);
    let e_cloud = uni(rng, ranges.e_cloud);
    let alpha = ranges.alpha_choices[rng.random_range(0..ranges.alpha_choices.len())];
    let theta1 = type_blocks(rng, k, ranges.theta);
    let theta2 = type_blocks(rng, k, ranges.theta);
    let p1 = dirichlet(rng, k, ranges.dirichlet);
    let p2 = if k == 1 { vec![vec![1.0]] } else { dominance_sorted_rows(rng, k, ranges.dirichlet) };

    let profile = EdgeProfile {
        unit_energy_cost: sigma,
        tx_power_dbm: power,
        link_rate_bps: rate * 1e6,
        ..ranges.profile
    };
    let market = MarketState {
        n_servers: ranges.n_servers,
        ladder: TypeLadder { theta1, theta2, p1, p2 },
        costs: cost_coeffs(&profile)?,
        hyper: ranges.hyper,
        alpha,
        beta: ranges.beta,
        sigma,
        e_cloud,
    };
    EnvState::new(market, profile)
}

/// How a raw action encodes second-period rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionMode {
    /// One second-period menu per first-period type: `K + K^2` entries.
    Full,
    /// A single second-period menu shared by all first-period types: `2K`.
    Shared,
}

impl ActionMode {
    pub fn dim(self, k: usize) -> usize {
        match self {
            ActionMode::Full => k + k * k,
            ActionMode::Shared => 2 * k,
        }
    }
}

impl std::str::FromStr for ActionMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "full" => Ok(ActionMode::Full),
            "shared" => Ok(ActionMode::Shared),
            other => Err(format!("unknown action mode {other:?} (expected full or shared)")),
        }
    }
}

/// Rounds decoded from a raw action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappedAction {
    pub t1: Vec<f64>,
    pub t2: Vec<Vec<f64>>,
    /// Entries that were outside `[-1, 1]` and got clamped.
    pub clamped: usize,
}

/// Affine map of every entry from `[-1, 1]` to `[t_min, t_max]`, then each
/// menu sorted ascending.
pub fn map_action(raw: &[f64], k: usize, mode: ActionMode, t_min: f64, t_max: f64) -> Result<MappedAction> {
    if raw.len() != mode.dim(k) {
        return Err(ContractError::Dimension(format!(
            "action has {} entries, expected {}",
            raw.len(),
            mode.dim(k)
        )));
    }
    let mut clamped = 0;
    let vals: Vec<f64> = raw
        .iter()
        .map(|&a| {
            let c = if a.is_nan() { 0.0 } else { a.clamp(-1.0, 1.0) };
            if c != a {
                clamped += 1;
            }
            t_min + (c + 1.0) / 2.0 * (t_max - t_min)
        })
        .collect();
    let sorted = |s: &[f64]| {
        let mut v = s.to_vec();
        v.sort_by(f64::total_cmp);
        v
    };
    let t1 = sorted(&vals[..k]);
    let t2 = match mode {
        ActionMode::Full => (0..k).map(|r| sorted(&vals[k + r * k..k + (r + 1) * k])).collect(),
        ActionMode::Shared => vec![sorted(&vals[k..]); k],
    };
    Ok(MappedAction { t1, t2, clamped })
}

/// Contract induced by a raw action in a market: mapped rounds made
/// feasible, then priced with the closed-form rewards.
pub fn action_contract(
    state: &EnvState,
    raw: &[f64],
    mode: ActionMode,
    t_min: f64,
    t_max: f64,
) -> Result<(TwoPeriodContract, MappedAction)> {
    let mut mapped = map_action(raw, state.market.k(), mode, t_min, t_max)?;
    let (mut t1, mut t2) = (mapped.t1.clone(), mapped.t2.clone());
    make_feasible_rounds(&mut t1, &mut t2, &state.market, t_max);
    let contract = closed_form_unchecked(&t1, &t2, &state.market.ladder, &state.market.costs, state.market.beta);
    mapped.t1 = t1;
    mapped.t2 = t2;
    Ok((contract, mapped))
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub reward: f64,
    pub profit: ProfitBreakdown,
    /// `lambda * sum(a^2)` over the clamped raw action.
    pub penalty: f64,
    pub contract: TwoPeriodContract,
    pub clamped: usize,
}

/// Penalised reward `U1 + beta U2 - lambda sum(a^2)`. Pure in its inputs.
pub fn step(
    state: &EnvState,
    raw: &[f64],
    lambda: f64,
    mode: ActionMode,
    t_min: f64,
    t_max: f64,
) -> Result<StepOutcome> {
    if !(lambda >= 0.0) {
        return Err(ContractError::InvalidMarket(format!("lambda must be non-negative, got {lambda}")));
    }
    let (contract, mapped) = action_contract(state, raw, mode, t_min, t_max)?;
    let profit = profit_unchecked(&contract, &state.market);
    let sq: f64 = raw.iter().map(|a| if a.is_nan() { 0.0 } else { a.clamp(-1.0, 1.0).powi(2) }).sum();
    let penalty = lambda * sq;
    Ok(StepOutcome { reward: profit.total - penalty, profit, penalty, contract, clamped: mapped.clamped })
}

/// One diagnostics row per environment step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub state_hash: u64,
    pub action: Vec<f64>,
    pub profit: f64,
    pub penalty: f64,
    pub clamped: usize,
}

/// Environment settings shared by every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub ranges: StateRanges,
    pub mode: ActionMode,
    pub lambda: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// Steps per episode; every step draws a fresh state.
    pub horizon: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self { ranges: StateRanges::default(), mode: ActionMode::Full, lambda: 0.01, t_min: 0.0, t_max: 200.0, horizon: 1 }
    }
}

impl EnvConfig {
    pub fn action_dim(&self) -> usize {
        self.mode.dim(self.ranges.k)
    }
}

/// Episodic wrapper: independent states, terminal after `horizon` steps.
#[derive(Debug, Clone)]
pub struct ContractEnv<R: Rng> {
    pub config: EnvConfig,
    rng: R,
    current: EnvState,
    t: usize,
}

/// Transition produced by [`ContractEnv::step`].
#[derive(Debug, Clone)]
pub struct Transition {
    pub state: EnvState,
    pub outcome: StepOutcome,
    pub next_state: EnvState,
    pub done: bool,
    pub diagnostics: StepDiagnostics,
}

impl<R: Rng> ContractEnv<R> {
    pub fn new(config: EnvConfig, mut rng: R) -> Result<Self> {
        if config.horizon == 0 {
            return Err(ContractError::InvalidMarket("horizon must be at least 1".into()));
        }
        if !(config.t_min >= 0.0 && config.t_min < config.t_max) {
            return Err(ContractError::InvalidGrid(format!(
                "need 0 <= t_min < t_max, got [{}, {}]",
                config.t_min, config.t_max
            )));
        }
        let current = sample_state(&mut rng, &config.ranges)?;
        Ok(Self { config, rng, current, t: 0 })
    }

    pub fn state(&self) -> &EnvState {
        &self.current
    }

    pub fn step(&mut self, raw: &[f64]) -> Result<Transition> {
        let c = &self.config;
        let outcome = step(&self.current, raw, c.lambda, c.mode, c.t_min, c.t_max)?;
        let next = sample_state(&mut self.rng, &c.ranges)?;
        self.t += 1;
        let done = self.t >= c.horizon;
        if done {
            self.t = 0;
        }
        let diagnostics = StepDiagnostics {
            state_hash: self.current.hash(),
            action: raw.to_vec(),
            profit: outcome.profit.total,
            penalty: outcome.penalty,
            clamped: outcome.clamped,
        };
        let state = std::mem::replace(&mut self.current, next.clone());
        Ok(Transition { state, outcome, next_state: next, done, diagnostics })
    }
}
