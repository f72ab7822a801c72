//! Closed-form rewards for hand-picked rounds, the full constraint check,
//! and each type's expected utility under truthful reporting.

use dyncontract::core::{closed_form_contract, cloud_profit, es_expected_utility, verify_all_constraints};
use dyncontract::Config;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = Config::default();
    let market = cfg.market_state()?;
    let t1 = vec![30.0, 60.0];
    let t2 = vec![vec![25.0, 55.0], vec![35.0, 70.0]];
    let contract = closed_form_contract(&t1, &t2, &market.ladder, &market.costs, market.beta)?;
    println!("first-period rewards  {:?}", contract.r1);
    println!("second-period rewards {:?}", contract.r2);

    let report = verify_all_constraints(&contract, &market.ladder, &market.costs, market.beta)?;
    println!("all constraints hold: {} (smallest slack {:.3e})", report.passed(), report.min_slack());
    for k in 0..market.k() {
        let u = es_expected_utility(k, &contract, &market.ladder, &market.costs, market.beta)?;
        println!("type {k}: expected utility {u:.6}");
    }
    let p = cloud_profit(&contract, &market)?;
    println!("profit: period 1 {:.4}, period 2 {:.4}, total {:.4}", p.period1, p.period2, p.total);
    Ok(())
}
