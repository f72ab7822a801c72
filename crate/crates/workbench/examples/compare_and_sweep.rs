//! Closed-form schemes compared on random markets, then the dynamic profit
//! as the number of edge servers grows.

use dyncontract::experiments::{compare, scheme_means, sweep, SweepAxis};
use dyncontract::Config;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = Config::default();
    cfg.experiment.states_per_seed = 10;
    let schemes: Vec<String> = ["dynamic", "static", "random"].iter().map(|s| s.to_string()).collect();
    let rows = compare(&cfg, &[0, 1], &schemes)?;
    for (scheme, mean) in scheme_means(&rows) {
        println!("{scheme:>8}: mean profit {mean:.3}");
    }
    for row in sweep(&cfg, SweepAxis::Servers, &[3.0, 6.0, 12.0, 18.0], &[0])? {
        println!("n = {:>4}: mean profit {:.3}", row.value, row.mean_profit);
    }
    Ok(())
}
