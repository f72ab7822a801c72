//! Two-period contract mathematics: closed-form rewards, feasibility
//! checking and expected utilities.

mod feasibility;
mod rewards;
mod types;
mod utility;

pub use feasibility::{
    check_feasible_p1, check_feasible_p2, check_reduced, tolerance_scale, verify_all_constraints, ConstraintReport,
    FamilySlack, FeasibilityReport, Violation, BINDING_REL_TOL,
};
pub use rewards::{
    closed_form_contract, optimal_rewards_p1, optimal_rewards_p2, rent_shift, second_period_rents,
};
pub(crate) use rewards::closed_form_unchecked;
pub use types::{MarketState, TwoPeriodContract, TypeLadder, SIMPLEX_TOL};
pub use utility::{cloud_profit, es_expected_utility, ProfitBreakdown};
pub(crate) use utility::profit_unchecked;
