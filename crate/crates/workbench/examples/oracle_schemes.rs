//! Grid-search optimum of the reference market next to the static and random
//! baselines.

use dyncontract::core::oracle::{grid_search, random_scheme, static_scheme};
use dyncontract::Config;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = Config::default();
    let market = cfg.market_state()?;
    let grid = cfg.grid();
    let best = grid_search(&market, &grid, cfg.search_mode())?;
    let fixed = static_scheme(&market, &grid)?;
    let random = random_scheme(&market, &grid, &mut ChaCha8Rng::seed_from_u64(5))?;
    for (name, s) in [("dynamic", &best), ("static", &fixed), ("random", &random)] {
        println!("{name:>8}: profit {:>10.4}  t1 {:?}", s.profit.total, s.contract.t1);
    }
    println!("dynamic second-period rounds {:?}", best.contract.t2);
    Ok(())
}
