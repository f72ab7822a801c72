//! Learning side of the dynamic contract toolkit: a small reverse-mode
//! autodiff engine, diffusion and Gaussian policies, row pruning, and the
//! soft actor-critic loop that trains them against the contract environment.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diffusion;
pub mod error;
pub mod gaussian;
pub mod nn;
pub mod pruning;
pub mod sac;

pub use error::{LearnError, Result};
