use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::mlp::{BoundMlp, Mlp};
use super::tape::Grads;
use crate::error::{LearnError, Result};
use crate::pruning::MaskSet;

/// Adam with decoupled weight decay.
///
/// Rows of hidden layers that are masked out are frozen for the step: no
/// moment update, no decay, no parameter change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    t: u64,
    m: Vec<(Array2<f64>, Array2<f64>)>,
    v: Vec<(Array2<f64>, Array2<f64>)>,
}

impl AdamW {
    pub fn new(net: &Mlp, lr: f64, weight_decay: f64) -> Self {
        let zeros = |net: &Mlp| {
            net.layers.iter().map(|l| (Array2::zeros(l.w.raw_dim()), Array2::zeros(l.b.raw_dim()))).collect()
        };
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay, t: 0, m: zeros(net), v: zeros(net) }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one update from the gradients of `bound` (parameters bound for
    /// this step). Non-finite gradients abort without touching anything.
    pub fn step(&mut self, net: &mut Mlp, bound: &BoundMlp, grads: &Grads, masks: Option<&MaskSet>) -> Result<()> {
        if self.lr < 0.0 {
            return Err(LearnError::Config(format!("learning rate must be non-negative, got {}", self.lr)));
        }
        let g: Vec<(Array2<f64>, Array2<f64>)> = net
            .layers
            .iter()
            .zip(&bound.vars)
            .map(|(l, &(w, b))| (grads.get_or_zeros(w, l.w.dim()), grads.get_or_zeros(b, l.b.dim())))
            .collect();
        if g.iter().any(|(w, b)| w.iter().chain(b.iter()).any(|x| !x.is_finite())) {
            return Err(LearnError::NonFinite("gradient".into()));
        }
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t.min(i32::MAX as u64) as i32);
        let c2 = 1.0 - b2.powi(self.t.min(i32::MAX as u64) as i32);
        let (lr, wd, eps) = (self.lr, self.weight_decay, self.eps);
        for (l, layer) in net.layers.iter_mut().enumerate() {
            let keep = masks.and_then(|m| m.layer(l));
            let (gw, gb) = &g[l];
            let (mw, mb) = &mut self.m[l];
            let (vw, vb) = &mut self.v[l];
            let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let mh = *m / c1;
                let vh = *v / c2;
                *p -= lr * (mh / (vh.sqrt() + eps) + wd * *p);
            };
            for r in 0..layer.w.nrows() {
                if keep.is_some_and(|k| !k[r]) {
                    continue;
                }
                for c in 0..layer.w.ncols() {
                    update(&mut layer.w[[r, c]], gw[[r, c]], &mut mw[[r, c]], &mut vw[[r, c]]);
                }
                update(&mut layer.b[[0, r]], gb[[0, r]], &mut mb[[0, r]], &mut vb[[0, r]]);
            }
        }
        Ok(())
    }
}
