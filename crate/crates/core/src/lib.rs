//! Diffusion-model synthesis of tabular health-record data.
//!
//! Records (binary codes, categorical groups, continuous measurements) are
//! encoded into `[0, 1]`-valued vectors, a preconditioned denoiser is trained
//! with a denoising score-matching objective, and new records are generated by
//! integrating the probability-flow ODE with Heun's method. The [`eval`]
//! module scores synthetic data for fidelity and privacy leakage.

pub mod cli;
pub mod config;
pub mod data;
pub mod diffusion;
pub mod error;
pub mod eval;
pub mod nn;
pub mod stats;

pub use error::{Error, Result};
