//! Two-period contract design between a cloud server and edge servers that
//! fine-tune a shared generative model, plus the market MDP used to learn it.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod contract;
pub mod econ;
pub mod error;
pub mod mdp;
pub mod oracle;

pub use contract::{
    check_feasible_p1, check_feasible_p2, check_reduced, closed_form_contract, cloud_profit, es_expected_utility,
    optimal_rewards_p1, optimal_rewards_p2, verify_all_constraints, ConstraintReport, FeasibilityReport, MarketState,
    ProfitBreakdown, TwoPeriodContract, TypeLadder,
};
pub use econ::{cost_coeffs, model_quality, CostCoeffs, EdgeProfile, QualityHyper};
pub use error::{ContractError, Result};
