//! A short pruned-diffusion SAC run on a single-period market, followed by an
//! evaluation of the target actor against the grid optimum.

use dyncontract::experiments::{oracle, seeded_states, train_checked};
use dyncontract::learn::sac::{evaluate_checkpoint, Variant};
use dyncontract::Config;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = Config::default();
    cfg.ranges.k = 1;
    cfg.trainer.variant = Variant::Edmsac;
    cfg.trainer.steps = 1500;
    cfg.trainer.log_interval = 250;
    let env = cfg.env_config();
    let out = train_checked(&cfg.trainer, &env)?;
    for row in &out.log {
        println!(
            "step {:>5}: eval reward {:>9.3}  actor loss {:>9.4}  critic loss {:>9.4}  masked {:.2}",
            row.step, row.eval_reward_mean, row.actor_loss, row.critic_loss, row.masked_fraction
        );
    }
    let states = seeded_states(&env, 99, 8)?;
    let learned = evaluate_checkpoint(&out.checkpoint, &states)?;
    let best: Vec<f64> = states.iter().map(|s| oracle(&cfg, s).map(|o| o.profit.total)).collect::<Result<_, _>>()?;
    let ratio = learned.profits.iter().sum::<f64>() / best.iter().sum::<f64>();
    println!("learned profit is {:.1}% of the grid optimum on 8 held-out markets", 100.0 * ratio);
    println!("compact actor widths {:?}", out.compact.spec.hidden);
    Ok(())
}
