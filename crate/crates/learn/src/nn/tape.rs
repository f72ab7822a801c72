//! Tensor-level reverse-mode automatic differentiation over row-major
//! `Array2<f64>` values.

use ndarray::{s, Array2, Axis};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// `a . w^T`
    MatMulT(Var, Var),
    /// `a + b` with `b` a `1 x n` row broadcast over rows.
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    MulConst(Var, Array2<f64>),
    AddConst(Var),
    Tanh(Var),
    Mish(Var),
    Exp(Var),
    Ln(Var),
    Square(Var),
    Clip(Var, f64, f64),
    Min(Var, Var),
    Concat(Vec<Var>),
    SliceCols(Var, usize, usize),
    SumCols(Var),
    Mean(Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Array2<f64>,
    op: Op,
    needs_grad: bool,
}

/// Records operations for one forward pass; [`Tape::backward`] returns the
/// gradient of a scalar node with respect to every node.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Leaf gradients indexed by [`Var`]; `None` for constants, intermediate
/// nodes and leaves that do not influence the output.
#[derive(Debug, Clone)]
pub struct Grads(Vec<Option<Array2<f64>>>);

impl Grads {
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.0.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, zeros of `shape` if it received none.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Array2<f64> {
        self.get(v).cloned().unwrap_or_else(|| Array2::zeros(shape))
    }
}

pub fn mish(x: f64) -> f64 {
    x * softplus(x).tanh()
}

pub fn mish_grad(x: f64) -> f64 {
    let sp = softplus(x);
    let t = sp.tanh();
    let sig = 1.0 / (1.0 + (-x).exp());
    t + x * (1.0 - t * t) * sig
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Array2<f64>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: &[Var]) -> bool {
        v.iter().any(|x| self.nodes[x.0].needs_grad)
    }

    /// A constant input; no gradient flows into it.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// A differentiable leaf.
    pub fn param(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn matmul_t(&mut self, a: Var, w: Var) -> Var {
        let v = self.value(a).dot(&self.value(w).t());
        let ng = self.ng(&[a, w]);
        self.push(v, Op::MatMulT(a, w), ng)
    }

    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        let ng = self.ng(&[a, b]);
        self.push(v, Op::AddRow(a, b), ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        let ng = self.ng(&[a, b]);
        self.push(v, Op::Add(a, b), ng)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        let ng = self.ng(&[a, b]);
        self.push(v, Op::Sub(a, b), ng)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        let ng = self.ng(&[a, b]);
        self.push(v, Op::Mul(a, b), ng)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.value(a) * s;
        let ng = self.ng(&[a]);
        self.push(v, Op::Scale(a, s), ng)
    }

    /// Elementwise product with a constant (broadcast allowed, e.g. `1 x n`).
    pub fn mul_const(&mut self, a: Var, c: Array2<f64>) -> Var {
        let v = self.value(a) * &c;
        let ng = self.ng(&[a]);
        self.push(v, Op::MulConst(a, c), ng)
    }

    pub fn add_const(&mut self, a: Var, c: Array2<f64>) -> Var {
        let v = self.value(a) + &c;
        let ng = self.ng(&[a]);
        self.push(v, Op::AddConst(a), ng)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::tanh);
        let ng = self.ng(&[a]);
        self.push(v, Op::Tanh(a), ng)
    }

    pub fn mish(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(mish);
        let ng = self.ng(&[a]);
        self.push(v, Op::Mish(a), ng)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::exp);
        let ng = self.ng(&[a]);
        self.push(v, Op::Exp(a), ng)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::ln);
        let ng = self.ng(&[a]);
        self.push(v, Op::Ln(a), ng)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x * x);
        let ng = self.ng(&[a]);
        self.push(v, Op::Square(a), ng)
    }

    /// Clamp to `[lo, hi]`; gradient passes only inside the interval.
    pub fn clip(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let v = self.value(a).mapv(|x| x.clamp(lo, hi));
        let ng = self.ng(&[a]);
        self.push(v, Op::Clip(a, lo, hi), ng)
    }

    /// Elementwise minimum; ties send the gradient to `a`.
    pub fn min(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.value(a).clone();
        v.zip_mut_with(self.value(b), |x, &y| *x = x.min(y));
        let ng = self.ng(&[a, b]);
        self.push(v, Op::Min(a, b), ng)
    }

    /// Column-wise concatenation of equal-height blocks.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("concat needs equal row counts");
        let ng = self.ng(parts);
        self.push(v, Op::Concat(parts.to_vec()), ng)
    }

    /// Columns `lo..hi`.
    pub fn slice_cols(&mut self, a: Var, lo: usize, hi: usize) -> Var {
        let v = self.value(a).slice(s![.., lo..hi]).to_owned();
        let ng = self.ng(&[a]);
        self.push(v, Op::SliceCols(a, lo, hi), ng)
    }

    /// Row sums as an `n x 1` column.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let v = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        let ng = self.ng(&[a]);
        self.push(v, Op::SumCols(a), ng)
    }

    /// Mean of all entries as a `1 x 1` value.
    pub fn mean(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let v = Array2::from_elem((1, 1), x.sum() / x.len() as f64);
        let ng = self.ng(&[a]);
        self.push(v, Op::Mean(a), ng)
    }

    /// Reverse sweep from `out`, seeded with ones.
    pub fn backward(&self, out: Var) -> Grads {
        let mut g: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        g[out.0] = Some(Array2::ones(self.nodes[out.0].value.raw_dim()));
        for i in (0..=out.0).rev() {
            let Some(gy) = g[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            if let Op::Leaf = node.op {
                g[i] = Some(gy);
                continue;
            }
            let acc = |v: Var, d: Array2<f64>, g: &mut Vec<Option<Array2<f64>>>| {
                if !self.nodes[v.0].needs_grad {
                    return;
                }
                match &mut g[v.0] {
                    Some(e) => *e += &d,
                    slot => *slot = Some(d),
                }
            };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMulT(a, w) => {
                    if self.nodes[a.0].needs_grad {
                        acc(*a, gy.dot(self.value(*w)), &mut g);
                    }
                    if self.nodes[w.0].needs_grad {
                        acc(*w, gy.t().dot(self.value(*a)), &mut g);
                    }
                }
                Op::AddRow(a, b) => {
                    if self.nodes[b.0].needs_grad {
                        acc(*b, gy.sum_axis(Axis(0)).insert_axis(Axis(0)), &mut g);
                    }
                    acc(*a, gy, &mut g);
                }
                Op::Add(a, b) => {
                    acc(*b, gy.clone(), &mut g);
                    acc(*a, gy, &mut g);
                }
                Op::Sub(a, b) => {
                    acc(*b, -&gy, &mut g);
                    acc(*a, gy, &mut g);
                }
                Op::Mul(a, b) => {
                    acc(*a, &gy * self.value(*b), &mut g);
                    acc(*b, &gy * self.value(*a), &mut g);
                }
                Op::Scale(a, s) => acc(*a, gy * *s, &mut g),
                Op::MulConst(a, c) => acc(*a, gy * c, &mut g),
                Op::AddConst(a) => acc(*a, gy, &mut g),
                Op::Tanh(a) => {
                    let d = gy * &node.value.mapv(|y| 1.0 - y * y);
                    acc(*a, d, &mut g);
                }
                Op::Mish(a) => {
                    let d = gy * &self.value(*a).mapv(mish_grad);
                    acc(*a, d, &mut g);
                }
                Op::Exp(a) => acc(*a, gy * &node.value, &mut g),
                Op::Ln(a) => acc(*a, gy / self.value(*a), &mut g),
                Op::SliceCols(a, lo, hi) => {
                    let mut d = Array2::zeros(self.value(*a).raw_dim());
                    d.slice_mut(s![.., *lo..*hi]).assign(&gy);
                    acc(*a, d, &mut g);
                }
                Op::Square(a) => acc(*a, gy * &(self.value(*a) * 2.0), &mut g),
                Op::Clip(a, lo, hi) => {
                    let mut d = gy;
                    d.zip_mut_with(self.value(*a), |d, &x| {
                        if x < *lo || x > *hi {
                            *d = 0.0;
                        }
                    });
                    acc(*a, d, &mut g);
                }
                Op::Min(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let mut da = gy.clone();
                    let mut db = gy;
                    ndarray::Zip::from(&mut da).and(&mut db).and(va).and(vb).for_each(|da, db, &x, &y| {
                        if x <= y {
                            *db = 0.0;
                        } else {
                            *da = 0.0;
                        }
                    });
                    acc(*a, da, &mut g);
                    acc(*b, db, &mut g);
                }
                Op::Concat(parts) => {
                    let mut c0 = 0;
                    for p in parts {
                        let w = self.value(*p).ncols();
                        acc(*p, gy.slice(s![.., c0..c0 + w]).to_owned(), &mut g);
                        c0 += w;
                    }
                }
                Op::SumCols(a) => {
                    let d = gy.broadcast(self.value(*a).raw_dim()).expect("column broadcast").to_owned();
                    acc(*a, d, &mut g);
                }
                Op::Mean(a) => {
                    let x = self.value(*a);
                    acc(*a, Array2::from_elem(x.raw_dim(), gy[[0, 0]] / x.len() as f64), &mut g);
                }
            }
        }
        // Only leaf gradients survive the sweep.
        Grads(g)
    }
}
