use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LearnError, Result};

/// One stored step. States are policy features, not raw state vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Fixed-capacity ring buffer; the oldest entry is overwritten when full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

/// A sampled minibatch as row-stacked matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub next_states: Array2<f64>,
    /// `n x 1`
    pub rewards: Array2<f64>,
    pub dones: Vec<bool>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(LearnError::Config("replay capacity must be positive".into()));
        }
        Ok(Self { capacity, items: Vec::with_capacity(capacity.min(1 << 16)), next: 0 })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        let finite = t.state.iter().chain(&t.action).chain(&t.next_state).all(|v| v.is_finite()) && t.reward.is_finite();
        if !finite {
            return Err(LearnError::NonFinite("transition".into()));
        }
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        Ok(())
    }

    /// Stored transitions, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    /// Indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<usize> {
        (0..n).map(|_| rng.random_range(0..self.items.len())).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Batch> {
        if self.items.is_empty() {
            return Err(LearnError::Config("cannot sample from an empty buffer".into()));
        }
        let idx = self.sample_indices(rng, n);
        let mat = |f: &dyn Fn(&Transition) -> &[f64]| {
            let d = f(&self.items[idx[0]]).len();
            Array2::from_shape_fn((n, d), |(i, j)| f(&self.items[idx[i]])[j])
        };
        Ok(Batch {
            states: mat(&|t| &t.state),
            actions: mat(&|t| &t.action),
            next_states: mat(&|t| &t.next_state),
            rewards: Array2::from_shape_fn((n, 1), |(i, _)| self.items[idx[i]].reward),
            dones: idx.iter().map(|&i| self.items[i].done).collect(),
        })
    }
}
