use serde::{Deserialize, Serialize};

use crate::contract::types::{MarketState, TwoPeriodContract, TypeLadder};
use crate::econ::{quality_unchecked, CostCoeffs};
use crate::error::{ContractError, Result};

/// Expected discounted utility of a truthful first-period type `k`
/// (zero-based): its period-one payoff plus the discounted expected payoff of
/// its own second-period menu.
pub fn es_expected_utility(
    k: usize,
    contract: &TwoPeriodContract,
    ladder: &TypeLadder,
    costs: &CostCoeffs,
    beta: f64,
) -> Result<f64> {
    let n = ladder.k();
    if k >= n {
        return Err(ContractError::TypeIndex { index: k, k: n });
    }
    contract.check_dims(n)?;
    let now = ladder.theta1[k] * contract.r1[k] - costs.c * contract.t1[k] - costs.e_fixed;
    let later: f64 = (0..n)
        .map(|j| {
            ladder.p2[k][j] * (ladder.theta2[j] * contract.r2[k][j] - costs.c * contract.t2[k][j] - costs.e_fixed)
        })
        .sum();
    Ok(now + beta * later)
}

/// Cloud profit split by period; `total = period1 + beta * period2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfitBreakdown {
    pub period1: f64,
    pub period2: f64,
    pub total: f64,
}

/// Expected cloud profit of a contract in a market.
///
/// The second-period expectation runs over the transition rows weighted by
/// the first-period probabilities.
pub fn cloud_profit(contract: &TwoPeriodContract, state: &MarketState) -> Result<ProfitBreakdown> {
    contract.check_dims(state.k())?;
    Ok(profit_unchecked(contract, state))
}

pub(crate) fn profit_unchecked(contract: &TwoPeriodContract, state: &MarketState) -> ProfitBreakdown {
    let k = state.k();
    let rate = state.hyper.rate();
    let n = state.n_servers as f64;
    let lad = &state.ladder;
    let integration = state.sigma * state.e_cloud;
    let margin = |t: f64, r: f64| n * (state.alpha * quality_unchecked(t, rate) - r);

    let period1: f64 = (0..k).map(|i| lad.p1[i] * margin(contract.t1[i], contract.r1[i])).sum::<f64>() - integration;
    let period2: f64 = (0..k)
        .map(|i| {
            lad.p1[i]
                * (0..k)
                    .map(|j| lad.p2[i][j] * margin(contract.t2[i][j], contract.r2[i][j]))
                    .sum::<f64>()
        })
        .sum::<f64>()
        - integration;
    ProfitBreakdown {
        period1,
        period2,
        total: period1 + state.beta * period2,
    }
}
