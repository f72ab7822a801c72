//! Samples random markets and steps the environment with a few raw actions.

use dyncontract::core::mdp::ContractEnv;
use dyncontract::Config;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = Config::default();
    let env_cfg = cfg.env_config();
    let dim = env_cfg.action_dim();
    let mut env = ContractEnv::new(env_cfg, ChaCha8Rng::seed_from_u64(3))?;
    println!("state vector length {}, action length {dim}", env.state().vector.len());
    for (i, level) in [-0.5, 0.0, 0.5, 0.9].into_iter().enumerate() {
        let alpha = env.state().market.alpha;
        let tr = env.step(&vec![level; dim])?;
        println!(
            "step {i}: alpha {alpha:>5}  reward {:>10.4}  profit {:>10.4}  penalty {:.4}  t1 {:?}",
            tr.outcome.reward, tr.outcome.profit.total, tr.outcome.penalty, tr.outcome.contract.t1
        );
    }
    Ok(())
}
