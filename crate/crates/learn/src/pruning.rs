//! Structured row pruning of hidden layers.
//!
//! Masks gate whole output units (weight row plus bias). Parameters stay
//! dense while training so masked rows can come back when importances
//! shift; [`compact_export`] removes them for deployment.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{LearnError, Result};
use crate::nn::{Linear, Mlp, MlpSpec};

/// Keep-flags per hidden layer; the output layer is never masked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskSet {
    pub rate: f64,
    pub layers: Vec<Vec<bool>>,
}

impl MaskSet {
    /// Keeps every row of every hidden layer.
    pub fn dense(net: &Mlp) -> Self {
        Self { rate: 0.0, layers: net.layers[..net.hidden_layers()].iter().map(|l| vec![true; l.rows()]).collect() }
    }

    pub fn layer(&self, l: usize) -> Option<&[bool]> {
        self.layers.get(l).map(|v| v.as_slice())
    }

    /// `1 x rows` multiplier for layer `l`, or `None` when nothing is masked.
    pub fn row_gate(&self, l: usize) -> Option<Array2<f64>> {
        let keep = self.layers.get(l)?;
        if keep.iter().all(|k| *k) {
            return None;
        }
        Some(Array2::from_shape_fn((1, keep.len()), |(_, i)| if keep[i] { 1.0 } else { 0.0 }))
    }

    pub fn masked_per_layer(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.iter().filter(|k| !**k).count()).collect()
    }

    /// Share of hidden rows that are masked.
    pub fn masked_fraction(&self) -> f64 {
        let total: usize = self.layers.iter().map(|l| l.len()).sum();
        if total == 0 {
            return 0.0;
        }
        self.masked_per_layer().iter().sum::<usize>() as f64 / total as f64
    }

    fn check(&self, net: &Mlp) -> Result<()> {
        let ok = self.layers.len() == net.hidden_layers()
            && self.layers.iter().zip(&net.layers).all(|(m, l)| m.len() == l.rows());
        if ok {
            Ok(())
        } else {
            Err(LearnError::Dimension("mask set does not match the network".into()))
        }
    }
}

/// Euclidean norm of every row of a weight matrix.
pub fn row_importance(w: &Array2<f64>) -> Vec<f64> {
    w.axis_iter(Axis(0)).map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt()).collect()
}

/// `ceil(rate * rows)`, robust to representation error in `rate`.
pub fn masked_count(rate: f64, rows: usize) -> usize {
    let x = rate * rows as f64;
    let c = (x - 1e-9 * x.max(1.0)).ceil().max(0.0) as usize;
    c.min(rows)
}

/// Masks the `ceil(rate * rows)` least important rows of each hidden layer,
/// ties going to the lower index.
pub fn build_masks(net: &Mlp, rate: f64) -> Result<MaskSet> {
    if !(0.0..1.0).contains(&rate) {
        return Err(LearnError::Config(format!("pruning rate must lie in [0, 1), got {rate}")));
    }
    let layers = net.layers[..net.hidden_layers()]
        .iter()
        .map(|layer| {
            let imp = row_importance(&layer.w);
            let mut order: Vec<usize> = (0..imp.len()).collect();
            order.sort_by(|&a, &b| imp[a].total_cmp(&imp[b]).then(a.cmp(&b)));
            let mut keep = vec![true; imp.len()];
            for &i in order.iter().take(masked_count(rate, imp.len())) {
                keep[i] = false;
            }
            keep
        })
        .collect();
    Ok(MaskSet { rate, layers })
}

/// Dense copy with masked rows and their biases set to zero.
pub fn apply_masks(net: &Mlp, masks: &MaskSet) -> Result<Mlp> {
    masks.check(net)?;
    let mut out = net.clone();
    for (layer, keep) in out.layers.iter_mut().zip(&masks.layers) {
        for (r, k) in keep.iter().enumerate() {
            if !k {
                layer.w.row_mut(r).fill(0.0);
                layer.b[[0, r]] = 0.0;
            }
        }
    }
    Ok(out)
}

/// Smaller network without the masked rows and the matching input columns
/// of the following layer.
pub fn compact_export(net: &Mlp, masks: &MaskSet) -> Result<Mlp> {
    masks.check(net)?;
    let n = net.layers.len();
    let kept: Vec<Vec<usize>> = (0..n)
        .map(|l| match masks.layer(l) {
            Some(keep) => (0..keep.len()).filter(|&i| keep[i]).collect(),
            None => (0..net.layers[l].rows()).collect(),
        })
        .collect();
    let mut layers = Vec::with_capacity(n);
    for (l, layer) in net.layers.iter().enumerate() {
        let cols: Vec<usize> = if l == 0 { (0..layer.w.ncols()).collect() } else { kept[l - 1].clone() };
        let rows = &kept[l];
        let w = Array2::from_shape_fn((rows.len(), cols.len()), |(i, j)| layer.w[[rows[i], cols[j]]]);
        let b = Array2::from_shape_fn((1, rows.len()), |(_, i)| layer.b[[0, rows[i]]]);
        layers.push(Linear { w, b });
    }
    let spec = MlpSpec { hidden: kept[..n - 1].iter().map(|k| k.len()).collect(), ..net.spec.clone() };
    if spec.hidden.contains(&0) {
        return Err(LearnError::Config("compact export would leave an empty hidden layer".into()));
    }
    Ok(Mlp { spec, layers })
}

/// Survivor counts and importance spread of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerMaskStats {
    pub layer: usize,
    pub rows: usize,
    pub survivors: usize,
    pub importance_min: f64,
    pub importance_mean: f64,
    pub importance_max: f64,
}

pub fn mask_stats(net: &Mlp, masks: &MaskSet) -> Vec<LayerMaskStats> {
    masks
        .layers
        .iter()
        .enumerate()
        .map(|(l, keep)| {
            let imp = row_importance(&net.layers[l].w);
            LayerMaskStats {
                layer: l,
                rows: keep.len(),
                survivors: keep.iter().filter(|k| **k).count(),
                importance_min: imp.iter().copied().fold(f64::INFINITY, f64::min),
                importance_mean: imp.iter().sum::<f64>() / imp.len().max(1) as f64,
                importance_max: imp.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn net(rows: Vec<Vec<f64>>) -> Mlp {
        let h = rows.len();
        let w = Array2::from_shape_fn((h, rows[0].len()), |(i, j)| rows[i][j]);
        let spec = MlpSpec { input: w.ncols(), hidden: vec![h], output: 1, hidden_act: Activation::Mish, output_act: Activation::Identity };
        Mlp { spec, layers: vec![Linear { w, b: Array2::zeros((1, h)) }, Linear::zeros(h, 1)] }
    }

    #[test]
    fn importance_examples() {
        assert_eq!(row_importance(&array![[3.0, 4.0], [0.0, 0.0]]), vec![5.0, 0.0]);
        let doubled = row_importance(&array![[6.0, 8.0]]);
        assert_eq!(doubled, vec![10.0]);
    }

    #[test]
    fn mask_examples() {
        let n = net(vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]]);
        assert_eq!(build_masks(&n, 0.5).unwrap().layers[0], vec![false, false, true, true]);
        assert_eq!(build_masks(&n, 0.0).unwrap().layers[0], vec![true; 4]);
        let tie = net(vec![vec![1.0], vec![1.0], vec![3.0], vec![4.0]]);
        assert_eq!(build_masks(&tie, 0.25).unwrap().layers[0], vec![false, true, true, true]);
        assert!(build_masks(&n, 1.0).is_err());
    }

    #[test]
    fn counts_are_exact() {
        for (rate, rows, want) in [(0.3, 10, 3), (0.7, 10, 7), (0.5, 256, 128), (0.3, 64, 20), (0.7, 64, 45)] {
            assert_eq!(masked_count(rate, rows), want, "{rate} {rows}");
        }
    }

    #[test]
    fn masked_forward_matches_zeroed_and_compact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = MlpSpec { input: 6, hidden: vec![16, 16], output: 3, hidden_act: Activation::Mish, output_act: Activation::Tanh };
        let net = Mlp::new(spec, &mut rng).unwrap();
        let masks = build_masks(&net, 0.5).unwrap();
        let zeroed = apply_masks(&net, &masks).unwrap();
        let small = compact_export(&net, &masks).unwrap();
        assert_eq!(small.spec.hidden, vec![8, 8]);
        let x = Array2::from_shape_simple_fn((50, 6), || rng.random_range(-2.0..2.0));
        let a = net.forward(&x, Some(&masks)).unwrap();
        let b = zeroed.forward(&x, None).unwrap();
        let c = small.forward(&x, None).unwrap();
        assert!((&a - &b).iter().all(|d| d.abs() <= 1e-12));
        assert!((&a - &c).iter().all(|d| d.abs() <= 1e-6));
        let dense = compact_export(&net, &MaskSet::dense(&net)).unwrap();
        assert_eq!(dense, net);
    }
}
