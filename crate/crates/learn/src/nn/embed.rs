use crate::error::{LearnError, Result};

/// Interleaved `[sin(m w_0), cos(m w_0), sin(m w_1), ...]` with frequencies
/// `w_i = 10000^(-2i / width)`.
pub fn sinusoidal_embed(m: usize, width: usize) -> Result<Vec<f64>> {
    if width == 0 || width % 2 == 1 {
        return Err(LearnError::Config(format!("embedding width must be even and positive, got {width}")));
    }
    let half = width / 2;
    let mut out = Vec::with_capacity(width);
    for i in 0..half {
        let freq = 10000f64.powf(-2.0 * i as f64 / width as f64);
        let x = m as f64 * freq;
        out.push(x.sin());
        out.push(x.cos());
    }
    Ok(out)
}
