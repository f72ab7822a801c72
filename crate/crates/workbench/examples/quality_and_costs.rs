//! Model quality as a function of fine-tuning rounds, and the per-round and
//! fixed energy cost of a default edge server.

use dyncontract::core::econ::{cost_coeffs, energy_total, model_quality, EdgeProfile, QualityHyper};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let hyper = QualityHyper::default();
    let profile = EdgeProfile::default();
    let costs = cost_coeffs(&profile)?;
    println!("per-round cost c = {:.6}, fixed energy cost = {:.6}", costs.c, costs.e_fixed);
    println!("{:>8} {:>10} {:>12}", "rounds", "quality", "energy (J)");
    for t in [0.0, 1.0, 5.0, 20.0, 50.0, 100.0, 200.0] {
        println!("{t:>8} {:>10.4} {:>12.4}", model_quality(t, &hyper)?, energy_total(&profile, t)?);
    }
    Ok(())
}
