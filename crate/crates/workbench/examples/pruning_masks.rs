//! Builds row masks from weight magnitudes and shows that the compact
//! network computes the same outputs as the masked one.

use dyncontract::learn::nn::{Activation, Mlp, MlpSpec};
use dyncontract::learn::pruning::{build_masks, compact_export, mask_stats};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let spec = MlpSpec { input: 6, hidden: vec![20, 20], output: 3, hidden_act: Activation::Mish, output_act: Activation::Tanh };
    let net = Mlp::new(spec, &mut rng)?;
    let x = Array2::from_shape_fn((5, 6), |(i, j)| ((i * 7 + j) as f64).sin());
    for rate in [0.0, 0.25, 0.5] {
        let masks = build_masks(&net, rate)?;
        let compact = compact_export(&net, &masks)?;
        let gap = (&net.forward(&x, Some(&masks))? - &compact.forward(&x, None)?).mapv(f64::abs).fold(0.0f64, |m, v| m.max(*v));
        let widths: Vec<usize> = mask_stats(&net, &masks).iter().map(|s| s.survivors).collect();
        println!(
            "rate {rate:.2}: masked fraction {:.3}, surviving rows {widths:?}, params {} -> {}, max output gap {gap:.1e}",
            masks.masked_fraction(),
            net.n_params(),
            compact.n_params()
        );
    }
    Ok(())
}
