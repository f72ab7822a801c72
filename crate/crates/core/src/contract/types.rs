use serde::{Deserialize, Serialize};

use crate::econ::{CostCoeffs, QualityHyper};
use crate::error::{ContractError, Result};

/// Probability rows must sum to one within this tolerance.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Ascending willingness-to-participate types for both periods together with
/// the first-period distribution and the type-conditioned transition matrix.
///
/// Indices are zero-based: `p2[k][j]` is the probability that an edge server
/// of first-period type `k` has second-period type `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeLadder {
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<Vec<f64>>,
}

impl TypeLadder {
    pub fn k(&self) -> usize {
        self.theta1.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 {
            return Err(ContractError::InvalidLadder("at least one type is required".into()));
        }
        if self.theta2.len() != k || self.p1.len() != k || self.p2.len() != k {
            return Err(ContractError::InvalidLadder(format!(
                "theta1, theta2, p1 and p2 must all have {k} entries"
            )));
        }
        for (name, th) in [("theta1", &self.theta1), ("theta2", &self.theta2)] {
            if th.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                return Err(ContractError::InvalidLadder(format!("{name} entries must be positive")));
            }
            if let Some(i) = th.windows(2).position(|w| w[1] <= w[0]) {
                return Err(ContractError::InvalidLadder(format!(
                    "{name} must be strictly ascending (index {})",
                    i + 1
                )));
            }
        }
        check_simplex("p1", &self.p1)?;
        for (r, row) in self.p2.iter().enumerate() {
            if row.len() != k {
                return Err(ContractError::InvalidLadder(format!("p2 row {r} must have {k} entries")));
            }
            check_simplex(&format!("p2 row {r}"), row)?;
        }
        // Higher first-period types put weakly more mass on higher
        // second-period types: cumulative mass is pointwise non-increasing in k.
        for r in 1..k {
            let mut lo = 0.0;
            let mut hi = 0.0;
            for j in 0..k - 1 {
                lo += self.p2[r - 1][j];
                hi += self.p2[r][j];
                if hi > lo + 1e-12 {
                    return Err(ContractError::InvalidLadder(format!(
                        "p2 row {r} does not stochastically dominate row {} (cutoff {j})",
                        r - 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Second-period probabilities marginalised over first-period types.
    pub fn p2_marginal(&self) -> Vec<f64> {
        let k = self.k();
        (0..k)
            .map(|j| (0..k).map(|r| self.p1[r] * self.p2[r][j]).sum())
            .collect()
    }

    pub fn theta_max(&self) -> f64 {
        self.theta1
            .iter()
            .chain(self.theta2.iter())
            .fold(0.0f64, |m, t| m.max(*t))
    }
}

fn check_simplex(name: &str, p: &[f64]) -> Result<()> {
    if p.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(ContractError::InvalidLadder(format!("{name} has negative or non-finite entries")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(ContractError::InvalidLadder(format!("{name} sums to {s}, expected 1")));
    }
    Ok(())
}

/// First-period menu plus one second-period menu per first-period type.
///
/// `t2[k][j]` and `r2[k][j]` are the rounds and reward of second-period type
/// `j` for edge servers that reported first-period type `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPeriodContract {
    pub t1: Vec<f64>,
    pub r1: Vec<f64>,
    pub t2: Vec<Vec<f64>>,
    pub r2: Vec<Vec<f64>>,
}

impl TwoPeriodContract {
    pub fn k(&self) -> usize {
        self.t1.len()
    }

    pub fn check_dims(&self, k: usize) -> Result<()> {
        let square = |m: &Vec<Vec<f64>>| m.len() == k && m.iter().all(|r| r.len() == k);
        if self.t1.len() != k || self.r1.len() != k || !square(&self.t2) || !square(&self.r2) {
            return Err(ContractError::Dimension(format!(
                "contract does not match a ladder with {k} types"
            )));
        }
        Ok(())
    }

    pub fn max_reward(&self) -> f64 {
        self.r1
            .iter()
            .chain(self.r2.iter().flatten())
            .fold(0.0f64, |m, r| m.max(r.abs()))
    }
}

/// One sampled market: population, types, costs and cloud-side parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    pub n_servers: usize,
    pub ladder: TypeLadder,
    pub costs: CostCoeffs,
    pub hyper: QualityHyper,
    /// Scale of the cloud's quality benefit.
    pub alpha: f64,
    /// Discount on second-period utility, in `[0, 1]`.
    pub beta: f64,
    pub sigma: f64,
    /// Integration energy spent by the cloud, Joules.
    pub e_cloud: f64,
}

impl MarketState {
    pub fn k(&self) -> usize {
        self.ladder.k()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_servers == 0 {
            return Err(ContractError::InvalidMarket("n_servers must be at least 1".into()));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(ContractError::InvalidMarket(format!("alpha must be non-negative, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(ContractError::InvalidMarket(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0 && self.e_cloud.is_finite() && self.e_cloud >= 0.0) {
            return Err(ContractError::InvalidMarket("sigma and e_cloud must be non-negative".into()));
        }
        self.costs.validate()?;
        self.hyper.validate()?;
        self.ladder.validate()
    }
}
