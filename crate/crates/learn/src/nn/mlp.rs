use ndarray::{Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{mish, Tape, Var};
use crate::error::{LearnError, Result};
use crate::pruning::MaskSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Mish,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, x: &mut Array2<f64>) {
        match self {
            Activation::Mish => x.mapv_inplace(mish),
            Activation::Tanh => x.mapv_inplace(f64::tanh),
            Activation::Identity => {}
        }
    }

    fn tape(self, t: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Mish => t.mish(x),
            Activation::Tanh => t.tanh(x),
            Activation::Identity => x,
        }
    }
}

/// Layer widths and activations of a fully connected network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
    pub hidden_act: Activation,
    pub output_act: Activation,
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() {
            return Err(LearnError::Config("an MLP needs at least one hidden layer".into()));
        }
        if self.input == 0 || self.output == 0 || self.hidden.contains(&0) {
            return Err(LearnError::Config("layer widths must be positive".into()));
        }
        Ok(())
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input];
        w.extend(&self.hidden);
        w.push(self.output);
        w
    }
}

/// Dense layer `y = x W^T + b`; row `i` of `w` feeds output unit `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub w: Array2<f64>,
    /// `1 x out`
    pub b: Array2<f64>,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(input: usize, output: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        let w = Array2::from_shape_simple_fn((output, input), || rng.random_range(-bound..bound));
        let b = Array2::from_shape_simple_fn((1, output), || rng.random_range(-bound..bound));
        Self { w, b }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Self { w: Array2::zeros((output, input)), b: Array2::zeros((1, output)) }
    }

    pub fn rows(&self) -> usize {
        self.w.nrows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub spec: MlpSpec,
    pub layers: Vec<Linear>,
}

/// Parameter leaves of an [`Mlp`] bound to a tape, `(w, b)` per layer.
#[derive(Debug, Clone)]
pub struct BoundMlp {
    pub vars: Vec<(Var, Var)>,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let w = spec.widths();
        let layers = w.windows(2).map(|p| Linear::new(p[0], p[1], rng)).collect();
        Ok(Self { spec, layers })
    }

    /// Same architecture with every parameter zero.
    pub fn zeros(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let w = spec.widths();
        let layers = w.windows(2).map(|p| Linear::zeros(p[0], p[1])).collect();
        Ok(Self { spec, layers })
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn hidden_layers(&self) -> usize {
        self.layers.len() - 1
    }

    fn act(&self, l: usize) -> Activation {
        if l + 1 == self.layers.len() {
            self.spec.output_act
        } else {
            self.spec.hidden_act
        }
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.spec.input {
            return Err(LearnError::Dimension(format!(
                "network expects {} inputs, got {}",
                self.spec.input,
                x.ncols()
            )));
        }
        Ok(())
    }

    /// Batched forward pass; `masks` gates the hidden units.
    pub fn forward(&self, x: &Array2<f64>, masks: Option<&MaskSet>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let mut h = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut y = h.dot(&layer.w.t()) + &layer.b;
            if let Some(m) = masks.and_then(|m| m.row_gate(l)) {
                y *= &m;
            }
            self.act(l).apply(&mut y);
            h = y;
        }
        Ok(h)
    }

    /// Records the parameters as differentiable leaves.
    pub fn bind(&self, tape: &mut Tape) -> BoundMlp {
        BoundMlp { vars: self.layers.iter().map(|l| (tape.param(l.w.clone()), tape.param(l.b.clone()))).collect() }
    }

    /// Records the parameters as constants (no gradient).
    pub fn bind_frozen(&self, tape: &mut Tape) -> BoundMlp {
        BoundMlp {
            vars: self.layers.iter().map(|l| (tape.constant(l.w.clone()), tape.constant(l.b.clone()))).collect(),
        }
    }

    /// Forward pass on a tape; values equal [`Mlp::forward`] bit for bit.
    pub fn forward_tape(&self, tape: &mut Tape, bound: &BoundMlp, x: Var, masks: Option<&MaskSet>) -> Var {
        let mut h = x;
        for (l, &(w, b)) in bound.vars.iter().enumerate() {
            let y = tape.matmul_t(h, w);
            let mut y = tape.add_row(y, b);
            if let Some(m) = masks.and_then(|m| m.row_gate(l)) {
                y = tape.mul_const(y, m);
            }
            h = self.act(l).tape(tape, y);
        }
        h
    }

    /// Copies the values of another network with the same architecture.
    pub fn assign(&mut self, other: &Mlp) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.w.assign(&b.w);
            a.b.assign(&b.b);
        }
    }

    /// `self <- tau * online + (1 - tau) * self`.
    pub fn soft_update(&mut self, online: &Mlp, tau: f64) -> Result<()> {
        if self.spec != online.spec {
            return Err(LearnError::Dimension("soft update between different architectures".into()));
        }
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            t.w.zip_mut_with(&o.w, |t, &o| *t = tau * o + (1.0 - tau) * *t);
            t.b.zip_mut_with(&o.b, |t, &o| *t = tau * o + (1.0 - tau) * *t);
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }

    /// Largest absolute parameter difference to another network.
    pub fn max_abs_diff(&self, other: &Mlp) -> f64 {
        self.layers
            .iter()
            .zip(&other.layers)
            .flat_map(|(a, b)| {
                let dw = (&a.w - &b.w).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let db = (&a.b - &b.b).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                [dw, db]
            })
            .fold(0.0, f64::max)
    }
}

/// Stacks equal-length rows into a matrix.
pub fn rows_to_array(rows: &[Vec<f64>]) -> Array2<f64> {
    let n = rows.len();
    let d = rows.first().map_or(0, |r| r.len());
    Array2::from_shape_fn((n, d), |(i, j)| rows[i][j])
}

/// Mean over rows as a vector.
pub fn column_means(x: &Array2<f64>) -> Vec<f64> {
    x.mean_axis(Axis(0)).map(|m| m.to_vec()).unwrap_or_default()
}
