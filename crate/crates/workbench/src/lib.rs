//! Experiment driver for the dynamic contract toolkit: TOML configuration,
//! scheme comparisons, parameter sweeps, CSV output and the `dyncontract`
//! command line.
//!
//! The building blocks live in [`dyncontract_core`] (economics, contracts,
//! oracles, the market MDP) and [`dyncontract_learn`] (autodiff, diffusion
//! policies, pruning, soft actor-critic); both are re-exported here.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod states;
pub mod table;

pub use config::Config;
pub use dyncontract_core as core;
pub use dyncontract_learn as learn;
pub use error::{Error, Result};
