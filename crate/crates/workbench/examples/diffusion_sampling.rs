//! Noise schedule of the denoiser and the reverse chain of an untrained
//! diffusion policy.

use dyncontract::learn::diffusion::{vp_schedule, ChainNoise, DenoiserTarget, DiffusionPolicy};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schedule = vp_schedule(6, 0.1, 10.0)?;
    for m in 1..=schedule.steps() {
        println!("m {m}: zeta {:.6}  chi {:.6}  chi_bar {:.6}", schedule.zeta(m), schedule.chi(m), schedule.chi_bar(m));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let policy = DiffusionPolicy::new(4, 2, vec![32, 32], 16, schedule, DenoiserTarget::Action, &mut rng)?;
    let states = Array2::from_shape_fn((3, 4), |(i, j)| (i as f64 - 1.0) * 0.3 + j as f64 * 0.1);
    let noise = ChainNoise::draw(&mut rng, 3, 2, policy.steps(), false);
    let mut trace = Vec::new();
    let actions = policy.sample_batch(&states, &noise, None, Some(&mut trace))?;
    for (m, x) in trace.iter().enumerate() {
        println!("x after {m} reverse steps, first row {:?}", x.row(0).to_vec());
    }
    println!("actions\n{actions:.4}");
    println!("approximate log-densities {:?}", policy.log_prob_approx(&states, &actions, None)?);
    Ok(())
}
