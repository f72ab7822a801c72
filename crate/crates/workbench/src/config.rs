//! Experiment configuration read from TOML. Every key is required, unknown
//! keys are rejected, and [`Config::default`] holds the reference setup.

use std::path::Path;

use dyncontract_core::contract::{MarketState, TypeLadder};
use dyncontract_core::econ::{cost_coeffs, EdgeProfile, QualityHyper};
use dyncontract_core::mdp::{ActionMode, EnvConfig, EnvState, StateRanges};
use dyncontract_core::oracle::{SearchGrid, SearchMode};
use dyncontract_learn::sac::TrainerConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The concrete market used by `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub n_servers: usize,
    pub alpha: f64,
    pub beta: f64,
    pub e_cloud: f64,
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<Vec<f64>>,
}

/// Sampling ranges for training, comparisons and sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangesSection {
    pub k: usize,
    pub n_servers: usize,
    pub beta: f64,
    pub theta: [f64; 2],
    pub sigma: [f64; 2],
    pub rate_mbps: [f64; 2],
    pub power_dbm: [f64; 2],
    pub e_cloud: [f64; 2],
    pub alpha_choices: Vec<f64>,
    pub dirichlet: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSection {
    pub action_mode: ActionMode,
    pub lambda: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub horizon: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMode {
    Auto,
    Joint,
    Coordinate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub grid_points: usize,
    pub integer_rounds: bool,
    pub mode: OracleMode,
    /// Sweeps for coordinate descent.
    pub sweeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub seeds: Vec<u64>,
    /// States drawn per seed in `compare` and `sweep`.
    pub states_per_seed: usize,
    pub schemes: Vec<String>,
    pub sweep_n: Vec<usize>,
    pub sweep_alpha: Vec<f64>,
    pub sweep_beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub market: MarketSection,
    pub profile: EdgeProfile,
    pub hyper: QualityHyper,
    pub ranges: RangesSection,
    pub env: EnvSection,
    pub oracle: OracleSection,
    pub trainer: TrainerConfig,
    pub experiment: ExperimentSection,
}

/// Scheme names accepted by `compare`.
pub const SCHEMES: [&str; 6] = ["dynamic", "static", "random", "edmsac", "dmsac", "gsac"];

impl Default for Config {
    fn default() -> Self {
        let r = StateRanges::default();
        Self {
            market: MarketSection {
                n_servers: 3,
                alpha: 200.0,
                beta: 0.5,
                e_cloud: 20.0,
                theta1: vec![18.0, 22.0],
                theta2: vec![17.0, 23.0],
                p1: vec![0.5, 0.5],
                p2: vec![vec![0.7, 0.3], vec![0.4, 0.6]],
            },
            profile: EdgeProfile::default(),
            hyper: QualityHyper::default(),
            ranges: RangesSection {
                k: r.k,
                n_servers: r.n_servers,
                beta: r.beta,
                theta: r.theta,
                sigma: r.sigma,
                rate_mbps: r.rate_mbps,
                power_dbm: r.power_dbm,
                e_cloud: r.e_cloud,
                alpha_choices: r.alpha_choices,
                dirichlet: r.dirichlet,
            },
            env: EnvSection { action_mode: ActionMode::Full, lambda: 0.01, t_min: 0.0, t_max: 200.0, horizon: 1 },
            oracle: OracleSection { grid_points: 64, integer_rounds: false, mode: OracleMode::Auto, sweeps: 50 },
            trainer: TrainerConfig::desk(),
            experiment: ExperimentSection {
                seeds: vec![0, 1, 2],
                states_per_seed: 20,
                schemes: SCHEMES.iter().map(|s| s.to_string()).collect(),
                sweep_n: vec![3, 6, 12, 18],
                sweep_alpha: vec![200.0, 250.0],
                sweep_beta: vec![0.0, 0.5, 1.0],
            },
        }
    }
}

fn field(section: &str, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("[{section}] {e}"))
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.message().trim().to_string() + &span_hint(text, e.span())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Checks every section, naming the offending one.
    pub fn validate(&self) -> Result<()> {
        self.market_state()?;
        self.state_ranges().validate().map_err(|e| field("ranges", e))?;
        self.grid().validate().map_err(|e| field("oracle", e))?;
        if !(self.env.lambda >= 0.0) || self.env.horizon == 0 {
            return Err(field("env", "need lambda >= 0 and horizon >= 1"));
        }
        if let OracleMode::Coordinate = self.oracle.mode {
            if self.oracle.sweeps == 0 {
                return Err(field("oracle", "sweeps must be positive"));
            }
        }
        self.trainer.validate().map_err(|e| field("trainer", e))?;
        let ex = &self.experiment;
        if ex.seeds.is_empty() || ex.states_per_seed == 0 {
            return Err(field("experiment", "seeds and states_per_seed must be non-empty"));
        }
        if let Some(bad) = ex.schemes.iter().find(|s| !SCHEMES.contains(&s.as_str())) {
            return Err(field("experiment", format!("unknown scheme {bad:?}; expected one of {}", SCHEMES.join(", "))));
        }
        Ok(())
    }

    /// Market from the `[market]`, `[profile]` and `[hyper]` sections.
    pub fn market_state(&self) -> Result<MarketState> {
        self.profile.validate().map_err(|e| field("profile", e))?;
        self.hyper.validate().map_err(|e| field("hyper", e))?;
        let m = &self.market;
        let state = MarketState {
            n_servers: m.n_servers,
            ladder: TypeLadder { theta1: m.theta1.clone(), theta2: m.theta2.clone(), p1: m.p1.clone(), p2: m.p2.clone() },
            costs: cost_coeffs(&self.profile).map_err(|e| field("profile", e))?,
            hyper: self.hyper,
            alpha: m.alpha,
            beta: m.beta,
            sigma: self.profile.unit_energy_cost,
            e_cloud: m.e_cloud,
        };
        state.validate().map_err(|e| field("market", e))?;
        Ok(state)
    }

    pub fn market_env_state(&self) -> Result<EnvState> {
        EnvState::new(self.market_state()?, self.profile).map_err(|e| field("market", e))
    }

    pub fn state_ranges(&self) -> StateRanges {
        let r = &self.ranges;
        StateRanges {
            k: r.k,
            n_servers: r.n_servers,
            beta: r.beta,
            theta: r.theta,
            sigma: r.sigma,
            rate_mbps: r.rate_mbps,
            power_dbm: r.power_dbm,
            e_cloud: r.e_cloud,
            alpha_choices: r.alpha_choices.clone(),
            dirichlet: r.dirichlet,
            profile: self.profile,
            hyper: self.hyper,
        }
    }

    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            ranges: self.state_ranges(),
            mode: self.env.action_mode,
            lambda: self.env.lambda,
            t_min: self.env.t_min,
            t_max: self.env.t_max,
            horizon: self.env.horizon,
        }
    }

    pub fn grid(&self) -> SearchGrid {
        SearchGrid {
            t_min: self.env.t_min,
            t_max: self.env.t_max,
            points: self.oracle.grid_points,
            integer_rounds: self.oracle.integer_rounds,
        }
    }

    pub fn search_mode(&self) -> SearchMode {
        match self.oracle.mode {
            OracleMode::Auto => SearchMode::Auto,
            OracleMode::Joint => SearchMode::Joint,
            OracleMode::Coordinate => SearchMode::CoordinateDescent { sweeps: self.oracle.sweeps },
        }
    }
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(s) => {
            let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
            format!(" (line {line})")
        }
        None => String::new(),
    }
}
