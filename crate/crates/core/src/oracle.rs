//! Grid oracles for the cloud's contract problem and the baseline schemes.
//!
//! Every candidate assigns rounds on a discrete grid, receives closed-form
//! rewards and is kept only if the full constraint enumeration accepts it.
//! Candidates are ranked by total profit, then by second-period profit (so
//! that second-period menus stay meaningful when `beta = 0`), then by the
//! lexicographically smallest rounds.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::contract::{
    closed_form_unchecked, profit_unchecked, second_period_rents, verify_all_constraints, MarketState,
    ProfitBreakdown, TwoPeriodContract, BINDING_REL_TOL,
};
use crate::error::{ContractError, Result};

/// Largest number of joint candidates [`grid_search`] will enumerate.
pub const JOINT_LIMIT: u128 = 50_000_000;

/// Evenly spaced training-round grid on `[t_min, t_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    /// Floor every grid value to an integer number of rounds.
    pub integer_rounds: bool,
}

impl Default for SearchGrid {
    fn default() -> Self {
        Self { t_min: 0.0, t_max: 200.0, points: 64, integer_rounds: false }
    }
}

impl SearchGrid {
    pub fn new(t_min: f64, t_max: f64, points: usize) -> Self {
        Self { t_min, t_max, points, integer_rounds: false }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_min.is_finite() && self.t_max.is_finite() && self.t_min >= 0.0 && self.t_min < self.t_max) {
            return Err(ContractError::InvalidGrid(format!(
                "need 0 <= t_min < t_max, got [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        if self.points < 2 {
            return Err(ContractError::InvalidGrid("at least two grid points are required".into()));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.t_max - self.t_min) / (self.points - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        let step = self.step();
        let mut v: Vec<f64> = (0..self.points)
            .map(|i| if i + 1 == self.points { self.t_max } else { self.t_min + step * i as f64 })
            .collect();
        if self.integer_rounds {
            for x in &mut v {
                *x = x.floor();
            }
            v.dedup();
        }
        v
    }
}

/// How [`grid_search`] explores the grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchMode {
    /// Enumerate every monotone assignment jointly.
    Joint,
    /// Cyclic coordinate descent started from the static scheme.
    CoordinateDescent { sweeps: usize },
    /// Joint for a single type, coordinate descent otherwise.
    #[default]
    Auto,
}

/// A contract together with its profit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub contract: TwoPeriodContract,
    pub profit: ProfitBreakdown,
}

/// Default sweep budget for coordinate descent.
pub const DEFAULT_SWEEPS: usize = 50;

fn better(a: &ProfitBreakdown, b: &ProfitBreakdown) -> bool {
    a.total > b.total || (a.total == b.total && a.period2 > b.period2)
}

/// Evaluates rounds: `None` if the rounds are not monotone or the resulting
/// closed-form contract violates any enumerated constraint.
pub fn evaluate_rounds(t1: &[f64], t2: &[Vec<f64>], state: &MarketState) -> Option<Solution> {
    let sorted = |v: &[f64]| v.windows(2).all(|w| w[0] <= w[1]);
    if !sorted(t1) || !t2.iter().all(|r| sorted(r)) {
        return None;
    }
    let contract = closed_form_unchecked(t1, t2, &state.ladder, &state.costs, state.beta);
    let report = verify_all_constraints(&contract, &state.ladder, &state.costs, state.beta).ok()?;
    if !report.passed() {
        return None;
    }
    let profit = profit_unchecked(&contract, state);
    Some(Solution { contract, profit })
}

/// Number of non-decreasing length-`k` sequences over `g` values.
fn monotone_count(g: usize, k: usize) -> u128 {
    // C(g + k - 1, k)
    let mut acc: u128 = 1;
    for i in 0..k as u128 {
        acc = acc * (g as u128 + i) / (i + 1);
    }
    acc
}

/// All non-decreasing index tuples of length `k` over `0..g`, in
/// lexicographic order.
fn monotone_tuples(g: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; k];
    fn rec(pos: usize, lo: usize, g: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos == cur.len() {
            out.push(cur.clone());
            return;
        }
        for i in lo..g {
            cur[pos] = i;
            rec(pos + 1, i, g, cur, out);
        }
    }
    rec(0, 0, g, &mut cur, &mut out);
    out
}

/// Maximises cloud profit over training rounds on `grid`.
pub fn grid_search(state: &MarketState, grid: &SearchGrid, mode: SearchMode) -> Result<Solution> {
    state.validate()?;
    grid.validate()?;
    match mode {
        SearchMode::Joint => joint_search(state, grid),
        SearchMode::Auto if state.k() == 1 => joint_search(state, grid),
        SearchMode::Auto => {
            let init = static_scheme(state, grid)?;
            coordinate_descent(state, grid, &init.contract, DEFAULT_SWEEPS)
        }
        SearchMode::CoordinateDescent { sweeps } => {
            let init = static_scheme(state, grid)?;
            coordinate_descent(state, grid, &init.contract, sweeps)
        }
    }
}

fn joint_search(state: &MarketState, grid: &SearchGrid) -> Result<Solution> {
    let k = state.k();
    let values = grid.values();
    let g = values.len();
    let per_menu = monotone_count(g, k);
    let candidates = per_menu.checked_pow(k as u32 + 1).unwrap_or(u128::MAX);
    if candidates > JOINT_LIMIT {
        return Err(ContractError::Intractable { candidates, limit: JOINT_LIMIT });
    }
    let tuples = monotone_tuples(g, k);
    let to_rounds = |idx: &[usize]| idx.iter().map(|&i| values[i]).collect::<Vec<f64>>();

    let mut best: Option<Solution> = None;
    let mut rows: Vec<usize> = vec![0; k];
    for t1_idx in &tuples {
        let t1 = to_rounds(t1_idx);
        // Odometer over the k second-period menus.
        rows.iter_mut().for_each(|r| *r = 0);
        loop {
            let t2: Vec<Vec<f64>> = rows.iter().map(|&r| to_rounds(&tuples[r])).collect();
            if let Some(sol) = evaluate_rounds(&t1, &t2, state) {
                if best.as_ref().is_none_or(|b| better(&sol.profit, &b.profit)) {
                    best = Some(sol);
                }
            }
            let mut pos = k;
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                rows[pos] += 1;
                if rows[pos] < tuples.len() {
                    break;
                }
                rows[pos] = 0;
                if pos == 0 {
                    pos = usize::MAX;
                    break;
                }
            }
            if pos == usize::MAX {
                break;
            }
        }
    }
    best.ok_or_else(|| ContractError::InvalidGrid("no feasible assignment on the grid".into()))
}

/// Cyclic coordinate descent over the `K + K^2` round entries, each moved
/// over the grid (plus its current value) with all other entries fixed.
/// Profit never decreases; stops at a fixed point or after `sweeps` sweeps.
pub fn coordinate_descent(
    state: &MarketState,
    grid: &SearchGrid,
    init: &TwoPeriodContract,
    sweeps: usize,
) -> Result<Solution> {
    state.validate()?;
    grid.validate()?;
    init.check_dims(state.k())?;
    let k = state.k();
    let values = grid.values();
    let mut t1 = init.t1.clone();
    let mut t2 = init.t2.clone();
    let mut best = evaluate_rounds(&t1, &t2, state).ok_or_else(|| {
        ContractError::InvalidMarket("coordinate descent needs a feasible monotone starting point".into())
    })?;

    for _ in 0..sweeps {
        let mut moved = false;
        for coord in 0..k + k * k {
            let current = if coord < k { t1[coord] } else { t2[(coord - k) / k][(coord - k) % k] };
            let mut pick = current;
            for &v in &values {
                if v == current {
                    continue;
                }
                set_coord(&mut t1, &mut t2, k, coord, v);
                if let Some(sol) = evaluate_rounds(&t1, &t2, state) {
                    if better(&sol.profit, &best.profit) {
                        best = sol;
                        pick = v;
                    }
                }
            }
            set_coord(&mut t1, &mut t2, k, coord, pick);
            if pick != current {
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    Ok(best)
}

fn set_coord(t1: &mut [f64], t2: &mut [Vec<f64>], k: usize, coord: usize, v: f64) {
    if coord < k {
        t1[coord] = v;
    } else {
        t2[(coord - k) / k][(coord - k) % k] = v;
    }
}

/// Best non-decreasing vector on the grid for a separable single-period
/// objective; joint when tractable, coordinate descent otherwise.
fn best_monotone(k: usize, values: &[f64], objective: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let g = values.len();
    if monotone_count(g, k) <= JOINT_LIMIT / 10 {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for idx in monotone_tuples(g, k) {
            let t: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
            let f = objective(&t);
            if best.as_ref().is_none_or(|(b, _)| f > *b) {
                best = Some((f, t));
            }
        }
        return best.map(|(_, t)| t).unwrap_or_default();
    }
    let mut t = vec![values[0]; k];
    let mut fbest = objective(&t);
    for _ in 0..DEFAULT_SWEEPS {
        let mut moved = false;
        for i in 0..k {
            let lo = if i == 0 { f64::NEG_INFINITY } else { t[i - 1] };
            let hi = if i + 1 == k { f64::INFINITY } else { t[i + 1] };
            let cur = t[i];
            let mut best_v = cur;
            for &v in values.iter().filter(|v| **v >= lo && **v <= hi) {
                t[i] = v;
                let f = objective(&t);
                if f > fbest {
                    fbest = f;
                    best_v = v;
                }
            }
            t[i] = best_v;
            moved = moved || best_v != cur;
        }
        if !moved {
            break;
        }
    }
    t
}

/// Static scheme: the single-period contract run twice. The first-period
/// menu maximises first-period profit alone; one shared second-period menu
/// maximises second-period profit under the marginal second-period type
/// distribution. Identical second-period menus carry no intertemporal rent.
pub fn static_scheme(state: &MarketState, grid: &SearchGrid) -> Result<Solution> {
    state.validate()?;
    grid.validate()?;
    let k = state.k();
    let values = grid.values();
    let lad = &state.ladder;
    let n = state.n_servers as f64;
    let rate = state.hyper.rate();
    let q = |t: f64| 1.0 - (-t * rate).exp2();

    let t1 = best_monotone(k, &values, |t| {
        let r = crate::contract::optimal_rewards_p2(t, &lad.theta1, &state.costs).unwrap_or_default();
        (0..k).map(|i| lad.p1[i] * n * (state.alpha * q(t[i]) - r[i])).sum()
    });
    let marginal = lad.p2_marginal();
    let shared = best_monotone(k, &values, |t| {
        let r = crate::contract::optimal_rewards_p2(t, &lad.theta2, &state.costs).unwrap_or_default();
        (0..k).map(|j| marginal[j] * n * (state.alpha * q(t[j]) - r[j])).sum()
    });
    let t2 = vec![shared; k];
    evaluate_rounds(&t1, &t2, state)
        .ok_or_else(|| ContractError::InvalidMarket("static contract failed constraint enumeration".into()))
}

/// Random scheme: rounds drawn uniformly on `[t_min, t_max]`, sorted, made
/// feasible with [`make_feasible_rounds`], then priced in closed form.
pub fn random_scheme<R: Rng + ?Sized>(state: &MarketState, grid: &SearchGrid, rng: &mut R) -> Result<Solution> {
    state.validate()?;
    grid.validate()?;
    let k = state.k();
    let mut draw = || rng.random_range(grid.t_min..=grid.t_max);
    let mut t1: Vec<f64> = (0..k).map(|_| draw()).collect();
    let mut t2: Vec<Vec<f64>> = (0..k).map(|_| (0..k).map(|_| draw()).collect()).collect();
    make_feasible_rounds(&mut t1, &mut t2, state, grid.t_max);
    evaluate_rounds(&t1, &t2, state)
        .ok_or_else(|| ContractError::InvalidMarket("repaired random contract failed constraint enumeration".into()))
}

/// Repairs arbitrary rounds in `[.., t_max]` into rounds whose closed-form
/// contract is feasible.
///
/// Sorts the first-period menu and every second-period menu; when `beta > 0`
/// also makes second-period rounds non-decreasing across first-period types
/// (column-wise running maximum) and keeps first-period rewards non-decreasing
/// by raising `t1[k]` or, at `t_max`, shrinking menu `k` toward menu `k-1`.
pub fn make_feasible_rounds(t1: &mut [f64], t2: &mut [Vec<f64>], state: &MarketState, t_max: f64) {
    let k = t1.len();
    t1.sort_by(f64::total_cmp);
    for row in t2.iter_mut() {
        row.sort_by(f64::total_cmp);
    }
    if state.beta <= 0.0 || k < 2 {
        return;
    }
    for r in 1..k {
        for j in 0..k {
            if t2[r][j] < t2[r - 1][j] {
                t2[r][j] = t2[r - 1][j];
            }
        }
    }
    let lad = &state.ladder;
    let c = state.costs.c;
    for r in 1..k {
        let lower = second_period_rents(&t2[r - 1], &lad.theta2, &state.costs);
        let upper = second_period_rents(&t2[r], &lad.theta2, &state.costs);
        let gain: f64 = (0..k).map(|j| lad.p2[r][j] * (upper[j] - lower[j])).sum();
        let need = state.beta * gain / c;
        if t1[r] - t1[r - 1] >= need {
            continue;
        }
        if t1[r - 1] + need <= t_max {
            t1[r] = t1[r - 1] + need;
        } else {
            let room = (t_max - t1[r - 1]).max(0.0);
            let s = room / need;
            let base = t2[r - 1].clone();
            for (x, b) in t2[r].iter_mut().zip(base) {
                *x = b + s * (*x - b);
            }
            t1[r] = t1[r - 1] + room;
        }
        for i in r + 1..k {
            if t1[i] < t1[r] {
                t1[i] = t1[r];
            }
        }
    }
}

/// Analytic single-type optimum of `alpha Q(T) - (c T + E) / theta`:
/// `T* = -(1/a) log2(c / (theta alpha a ln 2))`, clamped at zero.
pub fn single_type_optimum(alpha: f64, theta: f64, c: f64, rate: f64) -> f64 {
    let arg = c / (theta * alpha * rate * std::f64::consts::LN_2);
    (-(arg.log2()) / rate).max(0.0)
}

/// Tolerance used when comparing oracle profits.
pub fn profit_tolerance(p: &ProfitBreakdown) -> f64 {
    BINDING_REL_TOL * p.total.abs().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::{TypeLadder, check_reduced};
    use crate::econ::{CostCoeffs, QualityHyper};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single(beta: f64, alpha: f64) -> MarketState {
        MarketState {
            n_servers: 3,
            ladder: TypeLadder { theta1: vec![20.0], theta2: vec![20.0], p1: vec![1.0], p2: vec![vec![1.0]] },
            costs: CostCoeffs { c: 24.576, e_fixed: 20.384 },
            hyper: QualityHyper::default(),
            alpha,
            beta,
            sigma: 0.5,
            e_cloud: 20.0,
        }
    }

    fn two(beta: f64) -> MarketState {
        MarketState {
            n_servers: 3,
            ladder: TypeLadder {
                theta1: vec![16.0, 22.0],
                theta2: vec![17.0, 23.0],
                p1: vec![0.45, 0.55],
                p2: vec![vec![0.7, 0.3], vec![0.35, 0.65]],
            },
            costs: CostCoeffs { c: 24.576, e_fixed: 20.384 },
            hyper: QualityHyper::default(),
            alpha: 200.0,
            beta,
            sigma: 0.5,
            e_cloud: 20.0,
        }
    }

    #[test]
    fn grid_values_cover_range() {
        let g = SearchGrid::default();
        let v = g.values();
        assert_eq!(v.len(), 64);
        assert_eq!((v[0], v[63]), (0.0, 200.0));
        let ints = SearchGrid { integer_rounds: true, ..g }.values();
        assert!(ints.iter().all(|x| x.fract() == 0.0));
        assert!(SearchGrid::new(5.0, 5.0, 4).validate().is_err());
        assert!(SearchGrid::new(0.0, 5.0, 1).validate().is_err());
    }

    #[test]
    fn tuple_enumeration_counts() {
        for (g, k) in [(5, 1), (5, 2), (7, 3)] {
            assert_eq!(monotone_tuples(g, k).len() as u128, monotone_count(g, k));
        }
    }

    #[test]
    fn single_type_matches_first_order_condition() {
        let s = single(0.0, 200.0);
        let t_star = single_type_optimum(200.0, 20.0, 24.576, s.hyper.rate());
        assert!((t_star - 55.806_773_700_154_45).abs() < 1e-9);
        let g = SearchGrid::default();
        let sol = grid_search(&s, &g, SearchMode::Auto).unwrap();
        assert!((sol.contract.t1[0] - t_star).abs() <= g.step());
    }

    #[test]
    fn zero_benefit_means_zero_rounds() {
        let s = single(0.5, 0.0);
        let sol = grid_search(&s, &SearchGrid::default(), SearchMode::Joint).unwrap();
        assert_eq!(sol.contract.t1, vec![0.0]);
        assert_eq!(sol.contract.t2, vec![vec![0.0]]);
        let two_zero = MarketState { alpha: 0.0, ..two(0.5) };
        let sol = grid_search(&two_zero, &SearchGrid::default(), SearchMode::Auto).unwrap();
        assert!(sol.contract.t1.iter().chain(sol.contract.t2.iter().flatten()).all(|t| *t == 0.0));
    }

    #[test]
    fn monotone_fallback_keeps_its_best_coordinate() {
        let values: Vec<f64> = (0..60).map(f64::from).collect();
        assert!(monotone_count(values.len(), 5) > JOINT_LIMIT / 10);
        let target = [3.0, 10.0, 20.0, 30.0, 50.0];
        let t = best_monotone(5, &values, |t| -t.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>());
        assert_eq!(t, target);
    }

    #[test]
    fn undiscounted_second_period_is_row_wise_static() {
        let s = two(0.0);
        let g = SearchGrid::new(0.0, 200.0, 12);
        let joint = grid_search(&s, &g, SearchMode::Joint).unwrap();
        let lad = &s.ladder;
        let n = s.n_servers as f64;
        let rate = s.hyper.rate();
        for (row, p) in lad.p2.iter().enumerate() {
            let best = best_monotone(2, &g.values(), |t| {
                let r = crate::contract::optimal_rewards_p2(t, &lad.theta2, &s.costs).unwrap();
                (0..2).map(|j| p[j] * n * (s.alpha * (1.0 - (-t[j] * rate).exp2()) - r[j])).sum()
            });
            assert_eq!(joint.contract.t2[row], best, "row {row}");
        }
    }

    #[test]
    fn static_equals_joint_when_undiscounted() {
        let s = two(0.0);
        let g = SearchGrid::new(0.0, 200.0, 16);
        let joint = grid_search(&s, &g, SearchMode::Joint).unwrap();
        let stat = static_scheme(&s, &g).unwrap();
        assert_eq!(joint.contract.t1, stat.contract.t1);
        assert_eq!(joint.profit.total, stat.profit.total);
    }

    #[test]
    fn coordinate_descent_is_monotone_and_close_to_joint() {
        let s = two(0.5);
        let g = SearchGrid::new(0.0, 200.0, 12);
        let joint = grid_search(&s, &g, SearchMode::Joint).unwrap();
        let cd = grid_search(&s, &g, SearchMode::CoordinateDescent { sweeps: 20 }).unwrap();
        assert!(cd.profit.total <= joint.profit.total + profit_tolerance(&joint.profit));
        assert!(cd.profit.total >= 0.99 * joint.profit.total, "{} vs {}", cd.profit.total, joint.profit.total);
        let again = coordinate_descent(&s, &g, &joint.contract, 5).unwrap();
        assert_eq!(again.profit.total, joint.profit.total);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let start = random_scheme(&s, &g, &mut rng).unwrap();
        let improved = coordinate_descent(&s, &g, &start.contract, 5).unwrap();
        assert!(improved.profit.total >= start.profit.total);
    }

    #[test]
    fn joint_search_rejects_huge_spaces() {
        let mut s = two(0.5);
        s.ladder = TypeLadder {
            theta1: vec![15.0, 17.0, 19.0],
            theta2: vec![15.0, 17.0, 19.0],
            p1: vec![0.3, 0.3, 0.4],
            p2: vec![vec![0.5, 0.3, 0.2], vec![0.3, 0.4, 0.3], vec![0.2, 0.3, 0.5]],
        };
        let err = grid_search(&s, &SearchGrid::default(), SearchMode::Joint).unwrap_err();
        assert!(matches!(err, ContractError::Intractable { .. }));
    }

    #[test]
    fn repaired_rounds_pass_reduced_conditions() {
        let s = two(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let mut t1: Vec<f64> = (0..2).map(|_| rng.random_range(0.0..200.0)).collect();
            let mut t2: Vec<Vec<f64>> = (0..2).map(|_| (0..2).map(|_| rng.random_range(0.0..200.0)).collect()).collect();
            make_feasible_rounds(&mut t1, &mut t2, &s, 200.0);
            assert!(t1.iter().chain(t2.iter().flatten()).all(|t| *t <= 200.0 + 1e-9));
            let c = closed_form_unchecked(&t1, &t2, &s.ladder, &s.costs, s.beta);
            assert!(check_reduced(&c, &s.ladder, &s.costs, s.beta).unwrap().passed());
            assert!(verify_all_constraints(&c, &s.ladder, &s.costs, s.beta).unwrap().passed());
        }
    }

    #[test]
    fn random_never_beats_oracle() {
        let s = two(0.5);
        let g = SearchGrid::default();
        let oracle = grid_search(&s, &g, SearchMode::Auto).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let r = random_scheme(&s, &g, &mut rng).unwrap();
            assert!(r.profit.total <= oracle.profit.total);
        }
    }
}
