//! Preconditioned denoiser, its training objective, the noise-level ladder,
//! and deterministic probability-flow ODE samplers.

pub mod checkpoint;
mod denoiser;
mod precond;
mod sampler;
mod schedule;
mod train;

pub use checkpoint::Checkpoint;
pub use denoiser::{training_loss, Denoiser, DenoiserModel};
pub use precond::{noise_embedding, precondition_coefficients, Coefficients};
pub use sampler::{euler_sample, heun_sample, initial_noise, integrate, sample, Solver};
pub use schedule::NoiseSchedule;
pub use train::{train, EpochReport, TrainRun};
