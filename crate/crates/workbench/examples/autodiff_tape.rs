//! Fits a tiny network to y = sin(x) with the tape and AdamW.

use dyncontract::learn::nn::{Activation, AdamW, Mlp, MlpSpec, Tape};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let spec = MlpSpec { input: 1, hidden: vec![16, 16], output: 1, hidden_act: Activation::Mish, output_act: Activation::Identity };
    let mut net = Mlp::new(spec, &mut rng)?;
    let mut opt = AdamW::new(&net, 1e-2, 0.0);
    let x = Array2::from_shape_fn((32, 1), |(i, _)| -3.0 + 6.0 * i as f64 / 31.0);
    let y = x.mapv(f64::sin);
    for step in 0..=1500 {
        let mut tape = Tape::new();
        let bound = net.bind(&mut tape);
        let xv = tape.constant(x.clone());
        let pred = net.forward_tape(&mut tape, &bound, xv, None);
        let target = tape.constant(y.clone());
        let diff = tape.sub(pred, target);
        let sq = tape.square(diff);
        let loss = tape.mean(sq);
        if step % 300 == 0 {
            println!("step {step:>5}: mse {:.6}", tape.value(loss)[[0, 0]]);
        }
        let grads = tape.backward(loss);
        opt.step(&mut net, &bound, &grads, None)?;
    }
    Ok(())
}
