//! Dense network stack: matrices, MLP forward/backward, Adam, seeded RNG.

pub mod adam;
pub mod matrix;
pub mod mlp;
pub mod rng;

pub use adam::{AdamConfig, AdamState};
pub use matrix::{Matrix, Real};
pub use mlp::{ForwardCache, Gradients, Layer, Mlp};
pub use rng::RandomSource;
