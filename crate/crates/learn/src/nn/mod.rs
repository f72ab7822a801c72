//! Dense networks on a small reverse-mode autodiff tape.

mod adam;
mod embed;
mod mlp;
mod persist;
mod tape;

pub use adam::AdamW;
pub use embed::sinusoidal_embed;
pub use mlp::{column_means, rows_to_array, Activation, BoundMlp, Linear, Mlp, MlpSpec};
pub use persist::{load_json, save_json, FORMAT, VERSION};
pub use tape::{mish, mish_grad, Grads, Tape, Var};
