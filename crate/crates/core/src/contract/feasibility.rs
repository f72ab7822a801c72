//! Feasibility checks.
//!
//! Two independent routes: the reduced conditions (monotone menus, binding
//! lowest-type participation, binding adjacent downward constraints) and a
//! brute-force enumeration of every participation and incentive constraint.

use std::fmt;

use serde::Serialize;

use crate::contract::types::{TwoPeriodContract, TypeLadder};
use crate::econ::CostCoeffs;
use crate::error::Result;

/// Relative tolerance for equality (binding) constraints and for slack.
pub const BINDING_REL_TOL: f64 = 1e-9;

/// Magnitude used to scale tolerances: `max(1, |theta_max * R_max|)`.
pub fn tolerance_scale(theta_max: f64, reward_max: f64) -> f64 {
    (theta_max * reward_max).abs().max(1.0)
}

/// One failed reduced condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Condition number: 1 monotone rewards, 2 monotone rounds, 3 lowest-type
    /// participation binds, 4 adjacent downward constraint binds, 5 rounds of
    /// the second-period menus are ordered across first-period types.
    pub condition: u8,
    /// First-period row the condition refers to, if any.
    pub row: Option<usize>,
    pub index: usize,
    pub residual: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.row {
            Some(r) => write!(f, "condition {} (row {r}, index {}): residual {:e}", self.condition, self.index, self.residual),
            None => write!(f, "condition {} (index {}): residual {:e}", self.condition, self.index, self.residual),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, condition: u8) -> bool {
        self.violations.iter().any(|v| v.condition == condition)
    }

    fn merge(&mut self, other: FeasibilityReport) {
        self.violations.extend(other.violations);
    }
}

/// Reduced second-period conditions for one menu.
pub fn check_feasible_p2(t2_row: &[f64], r2_row: &[f64], theta2: &[f64], costs: &CostCoeffs) -> FeasibilityReport {
    let rmax = r2_row.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let tmax = theta2.iter().fold(0.0f64, |m, t| m.max(*t));
    let tol = BINDING_REL_TOL * tolerance_scale(tmax, rmax);
    check_p2_with_tol(t2_row, r2_row, theta2, costs, tol, None)
}

fn check_p2_with_tol(
    t: &[f64],
    r: &[f64],
    theta: &[f64],
    costs: &CostCoeffs,
    tol: f64,
    row: Option<usize>,
) -> FeasibilityReport {
    let mut rep = FeasibilityReport::default();
    let mut push = |condition, index, residual| rep.violations.push(Violation { condition, row, index, residual });
    monotone_violations(r, tol, |i, res| push(1, i, res));
    monotone_violations(t, tol, |i, res| push(2, i, res));
    let ir = theta[0] * r[0] - costs.c * t[0] - costs.e_fixed;
    if ir.abs() > tol {
        push(3, 0, ir);
    }
    for i in 1..t.len() {
        let res = (theta[i] * r[i] - costs.c * t[i]) - (theta[i] * r[i - 1] - costs.c * t[i - 1]);
        if res.abs() > tol {
            push(4, i, res);
        }
    }
    rep
}

fn monotone_violations(v: &[f64], tol: f64, mut f: impl FnMut(usize, f64)) {
    if v[0] < -tol {
        f(0, v[0]);
    }
    for i in 1..v.len() {
        let d = v[i] - v[i - 1];
        if d < -tol {
            f(i, d);
        }
    }
}

/// Reduced first-period conditions plus, when `beta > 0`, the ordering of
/// second-period rounds across first-period types (condition 5).
pub fn check_feasible_p1(
    contract: &TwoPeriodContract,
    ladder: &TypeLadder,
    costs: &CostCoeffs,
    beta: f64,
) -> Result<FeasibilityReport> {
    let k = ladder.k();
    contract.check_dims(k)?;
    let tol = BINDING_REL_TOL * tolerance_scale(ladder.theta_max(), contract.max_reward());
    let th1 = &ladder.theta1;
    let mut rep = FeasibilityReport::default();
    let mut push = |condition, row, index, residual| rep.violations.push(Violation { condition, row, index, residual });
    monotone_violations(&contract.r1, tol, |i, res| push(1, None, i, res));
    monotone_violations(&contract.t1, tol, |i, res| push(2, None, i, res));
    let ir = th1[0] * contract.r1[0] - costs.c * contract.t1[0] - costs.e_fixed;
    if ir.abs() > tol {
        push(3, None, 0, ir);
    }
    let rents: Vec<Vec<f64>> = (0..k).map(|row| period_two_utilities(contract, ladder, costs, row)).collect();
    for i in 1..k {
        let truthful = deviation_value(contract, ladder, costs, beta, &rents, i, i);
        let mimic = deviation_value(contract, ladder, costs, beta, &rents, i, i - 1);
        if (truthful - mimic).abs() > tol {
            push(4, None, i, truthful - mimic);
        }
        for j in 0..k {
            if beta <= 0.0 {
                break;
            }
            let d = contract.t2[i][j] - contract.t2[i - 1][j];
            if d < -tol {
                push(5, Some(i), j, d);
            }
        }
    }
    Ok(rep)
}

/// All reduced conditions: every second-period menu plus the first period.
pub fn check_reduced(
    contract: &TwoPeriodContract,
    ladder: &TypeLadder,
    costs: &CostCoeffs,
    beta: f64,
) -> Result<FeasibilityReport> {
    let mut rep = check_feasible_p1(contract, ladder, costs, beta)?;
    let tol = BINDING_REL_TOL * tolerance_scale(ladder.theta_max(), contract.max_reward());
    for (row, (t, r)) in contract.t2.iter().zip(&contract.r2).enumerate() {
        rep.merge(check_p2_with_tol(t, r, &ladder.theta2, costs, tol, Some(row)));
    }
    Ok(rep)
}

/// Second-period utility of every type `j` under first-period row `row`.
fn period_two_utilities(c: &TwoPeriodContract, ladder: &TypeLadder, costs: &CostCoeffs, row: usize) -> Vec<f64> {
    (0..ladder.k())
        .map(|j| ladder.theta2[j] * c.r2[row][j] - costs.c * c.t2[row][j] - costs.e_fixed)
        .collect()
}

/// Expected discounted utility of a true first-period type `truth` that
/// reports `report`: period-one payoff of the reported item plus the
/// discounted rent of the reported type's second-period menu, weighted by
/// the true type's transition row.
fn deviation_value(
    c: &TwoPeriodContract,
    ladder: &TypeLadder,
    costs: &CostCoeffs,
    beta: f64,
    rents: &[Vec<f64>],
    truth: usize,
    report: usize,
) -> f64 {
    let now = ladder.theta1[truth] * c.r1[report] - costs.c * c.t1[report] - costs.e_fixed;
    let later: f64 = ladder.p2[truth].iter().zip(&rents[report]).map(|(p, u)| p * u).sum();
    now + beta * later
}

/// Minimum slack of one constraint family and where it occurs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilySlack {
    pub count: usize,
    pub min_slack: f64,
    /// `(row, truth, report)`; unused positions repeat `truth`.
    pub argmin: Option<(usize, usize, usize)>,
}

impl FamilySlack {
    fn new() -> Self {
        Self { count: 0, min_slack: f64::INFINITY, argmin: None }
    }

    fn observe(&mut self, slack: f64, at: (usize, usize, usize)) {
        self.count += 1;
        if slack < self.min_slack {
            self.min_slack = slack;
            self.argmin = Some(at);
        }
    }

    /// An empty family is vacuously satisfied.
    pub fn satisfied(&self, tol: f64) -> bool {
        self.count == 0 || self.min_slack >= -tol
    }
}

/// Result of enumerating every constraint of a two-period contract.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintReport {
    pub ir2: FamilySlack,
    pub ic2: FamilySlack,
    /// Participation in period 1, on the expected discounted utility.
    pub ir1: FamilySlack,
    pub iic: FamilySlack,
    /// Largest `|utility|` of the lowest type, over period 1 and every
    /// second-period menu.
    pub ir_binding_residual: f64,
    /// Largest residual of the adjacent downward constraints (period-2 IC
    /// and period-1 intertemporal IC).
    pub adjacent_binding_residual: f64,
    pub scale: f64,
}

impl ConstraintReport {
    pub fn tolerance(&self) -> f64 {
        BINDING_REL_TOL * self.scale
    }

    pub fn min_slack(&self) -> f64 {
        [self.ir2, self.ic2, self.ir1, self.iic]
            .iter()
            .filter(|f| f.count > 0)
            .fold(f64::INFINITY, |m, f| m.min(f.min_slack))
    }

    pub fn passed(&self) -> bool {
        let tol = self.tolerance();
        [self.ir2, self.ic2, self.ir1, self.iic].iter().all(|f| f.satisfied(tol))
    }
}

/// Enumerates all `K` participation and `K(K-1)` incentive constraints of
/// every second-period menu, all `K` first-period participation constraints
/// and all `K(K-1)` intertemporal incentive constraints.
pub fn verify_all_constraints(
    contract: &TwoPeriodContract,
    ladder: &TypeLadder,
    costs: &CostCoeffs,
    beta: f64,
) -> Result<ConstraintReport> {
    let k = ladder.k();
    contract.check_dims(k)?;
    let th2 = &ladder.theta2;
    let mut ir2 = FamilySlack::new();
    let mut ic2 = FamilySlack::new();
    let mut ir1 = FamilySlack::new();
    let mut iic = FamilySlack::new();
    let mut ir_binding: f64 = 0.0;
    let mut adjacent: f64 = 0.0;

    let rents: Vec<Vec<f64>> = (0..k).map(|row| period_two_utilities(contract, ladder, costs, row)).collect();
    for row in 0..k {
        let t = &contract.t2[row];
        let r = &contract.r2[row];
        for i in 0..k {
            ir2.observe(rents[row][i], (row, i, i));
            for j in 0..k {
                if i == j {
                    continue;
                }
                let own = th2[i] * r[i] - costs.c * t[i];
                let other = th2[i] * r[j] - costs.c * t[j];
                ic2.observe(own - other, (row, i, j));
                if j + 1 == i {
                    adjacent = adjacent.max((own - other).abs());
                }
            }
        }
        ir_binding = ir_binding.max(rents[row][0].abs());
    }

    for truth in 0..k {
        let truthful = deviation_value(contract, ladder, costs, beta, &rents, truth, truth);
        ir1.observe(truthful, (truth, truth, truth));
        for report in 0..k {
            if report == truth {
                continue;
            }
            let mimic = deviation_value(contract, ladder, costs, beta, &rents, truth, report);
            iic.observe(truthful - mimic, (truth, truth, report));
            if report + 1 == truth {
                adjacent = adjacent.max((truthful - mimic).abs());
            }
        }
    }
    let u1_low = ladder.theta1[0] * contract.r1[0] - costs.c * contract.t1[0] - costs.e_fixed;
    ir_binding = ir_binding.max(u1_low.abs());

    Ok(ConstraintReport {
        ir2,
        ic2,
        ir1,
        iic,
        ir_binding_residual: ir_binding,
        adjacent_binding_residual: adjacent,
        scale: tolerance_scale(ladder.theta_max(), contract.max_reward()),
    })
}
