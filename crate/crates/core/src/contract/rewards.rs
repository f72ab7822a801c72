//! Closed-form optimal rewards for a given assignment of training rounds.
//!
//! Period 2: the lowest type's participation constraint binds and every
//! adjacent downward incentive constraint binds, giving the information-rent
//! recursion. Period 1 adds the change in expected second-period rent that
//! an edge server forgoes by mimicking the next lower type.

use crate::contract::types::{TwoPeriodContract, TypeLadder};
use crate::econ::CostCoeffs;
use crate::error::{ContractError, Result};

/// Optimal second-period rewards for one first-period type's menu.
pub fn optimal_rewards_p2(t2_row: &[f64], theta2: &[f64], costs: &CostCoeffs) -> Result<Vec<f64>> {
    if t2_row.len() != theta2.len() || t2_row.is_empty() {
        return Err(ContractError::Dimension(format!(
            "rounds row has {} entries, ladder has {}",
            t2_row.len(),
            theta2.len()
        )));
    }
    check_rounds_row("second-period rounds", t2_row)?;
    Ok(rewards_p2_unchecked(t2_row, theta2, costs))
}

pub(crate) fn rewards_p2_unchecked(t2_row: &[f64], theta2: &[f64], costs: &CostCoeffs) -> Vec<f64> {
    let mut out = Vec::with_capacity(t2_row.len());
    let mut r = (costs.c * t2_row[0] + costs.e_fixed) / theta2[0];
    out.push(r);
    for j in 1..t2_row.len() {
        r += costs.c * (t2_row[j] - t2_row[j - 1]) / theta2[j];
        out.push(r);
    }
    out
}

/// Second-period utility `theta_j R_j - c T_j - E` of every type under the
/// closed-form menu for `t2_row`, computed without forming the rewards.
///
/// Equals `E (theta_j / theta_1 - 1) + theta_j c sum_{l<j} T_l (1/theta_l - 1/theta_{l+1})`.
pub fn second_period_rents(t2_row: &[f64], theta2: &[f64], costs: &CostCoeffs) -> Vec<f64> {
    let mut acc = 0.0;
    (0..t2_row.len())
        .map(|j| {
            if j > 0 {
                acc += t2_row[j - 1] * (1.0 / theta2[j - 1] - 1.0 / theta2[j]);
            }
            costs.e_fixed * (theta2[j] / theta2[0] - 1.0) + theta2[j] * costs.c * acc
        })
        .collect()
}

/// Rent difference `Phi_j` between the menus of first-period types `k-1` and
/// `k`, for every second-period type `j` (`Phi_0 = 0`).
pub fn rent_shift(t2_lower: &[f64], t2_upper: &[f64], theta2: &[f64], costs: &CostCoeffs) -> Vec<f64> {
    let mut acc = 0.0;
    (0..theta2.len())
        .map(|j| {
            if j > 0 {
                let l = j - 1;
                acc += (t2_lower[l] - t2_upper[l]) * (1.0 / theta2[l] - 1.0 / theta2[l + 1]);
            }
            theta2[j] * costs.c * acc
        })
        .collect()
}

/// Optimal first-period rewards given first-period rounds and the full
/// second-period rounds matrix.
pub fn optimal_rewards_p1(
    t1: &[f64],
    t2: &[Vec<f64>],
    ladder: &TypeLadder,
    costs: &CostCoeffs,
    beta: f64,
) -> Result<Vec<f64>> {
    let k = ladder.k();
    if t1.len() != k || t2.len() != k || t2.iter().any(|r| r.len() != k) {
        return Err(ContractError::Dimension(format!("rounds do not match a ladder with {k} types")));
    }
    check_rounds_row("first-period rounds", t1)?;
    for row in t2 {
        check_rounds_row("second-period rounds", row)?;
    }
    Ok(rewards_p1_unchecked(t1, t2, ladder, costs, beta))
}

pub(crate) fn rewards_p1_unchecked(
    t1: &[f64],
    t2: &[Vec<f64>],
    ladder: &TypeLadder,
    costs: &CostCoeffs,
    beta: f64,
) -> Vec<f64> {
    let k = ladder.k();
    let th1 = &ladder.theta1;
    let mut out = Vec::with_capacity(k);
    let mut r = (costs.c * t1[0] + costs.e_fixed) / th1[0];
    out.push(r);
    for i in 1..k {
        let phi = rent_shift(&t2[i - 1], &t2[i], &ladder.theta2, costs);
        let expected: f64 = (1..k).map(|j| ladder.p2[i][j] * phi[j]).sum();
        r += (t1[i] - t1[i - 1]) * costs.c / th1[i] + beta / th1[i] * expected;
        out.push(r);
    }
    out
}

/// Builds the contract whose rewards are the closed-form optimum for the
/// given rounds.
pub fn closed_form_contract(
    t1: &[f64],
    t2: &[Vec<f64>],
    ladder: &TypeLadder,
    costs: &CostCoeffs,
    beta: f64,
) -> Result<TwoPeriodContract> {
    let r1 = optimal_rewards_p1(t1, t2, ladder, costs, beta)?;
    let r2 = t2
        .iter()
        .map(|row| rewards_p2_unchecked(row, &ladder.theta2, costs))
        .collect();
    Ok(TwoPeriodContract {
        t1: t1.to_vec(),
        r1,
        t2: t2.to_vec(),
        r2,
    })
}

pub(crate) fn closed_form_unchecked(
    t1: &[f64],
    t2: &[Vec<f64>],
    ladder: &TypeLadder,
    costs: &CostCoeffs,
    beta: f64,
) -> TwoPeriodContract {
    TwoPeriodContract {
        t1: t1.to_vec(),
        r1: rewards_p1_unchecked(t1, t2, ladder, costs, beta),
        t2: t2.to_vec(),
        r2: t2
            .iter()
            .map(|row| rewards_p2_unchecked(row, &ladder.theta2, costs))
            .collect(),
    }
}

fn check_rounds_row(what: &'static str, row: &[f64]) -> Result<()> {
    if let Some(bad) = row.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(ContractError::NegativeRounds(*bad));
    }
    if let Some(i) = row.windows(2).position(|w| w[1] < w[0]) {
        return Err(ContractError::NotMonotone { what, index: i + 1 });
    }
    Ok(())
}
