use rayon::prelude::*;

use crate::data::RecordMatrix;
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, AdamState, Gradients, Matrix, RandomSource};

use super::denoiser::DenoiserModel;
use super::schedule::NoiseSchedule;

/// Optimization settings for one training run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainRun {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Invoke the epoch callback with `checkpoint_due = true` every this many
    /// epochs; 0 disables intermediate checkpoints.
    pub checkpoint_interval: usize,
    /// Sequential gradient reductions, bit-reproducible across thread counts.
    pub deterministic: bool,
}

impl Default for TrainRun {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 256,
            adam: AdamConfig::default(),
            seed: 0,
            checkpoint_interval: 0,
            deterministic: true,
        }
    }
}

impl TrainRun {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        let a = &self.adam;
        if !(a.learning_rate > 0.0 && a.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", a.learning_rate)));
        }
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2)) {
            return Err(Error::Config(format!("betas must lie in [0, 1), got {} and {}", a.beta1, a.beta2)));
        }
        if !(a.eps > 0.0) {
            return Err(Error::Config(format!("adam eps must be positive, got {}", a.eps)));
        }
        Ok(())
    }
}

/// Progress passed to the per-epoch callback of [`train`].
pub struct EpochReport<'a> {
    /// 1-based epoch number.
    pub epoch: usize,
    pub mean_loss: f64,
    pub model: &'a DenoiserModel,
    pub checkpoint_due: bool,
}

/// Rows per parallel chunk when `deterministic` is off.
const PARALLEL_CHUNK: usize = 64;

/// Fits `model` by minimizing the denoising loss with Adam.
///
/// Each epoch visits the rows in a fresh random order; every row of a
/// mini-batch gets its own log-normal noise level and Gaussian noise draw.
/// Returns the trained model and the per-epoch mean losses.
pub fn train<F>(
    mut model: DenoiserModel,
    data: &RecordMatrix,
    run: &TrainRun,
    schedule: &NoiseSchedule,
    mut on_epoch: F,
) -> Result<(DenoiserModel, Vec<f64>)>
where
    F: FnMut(&EpochReport<'_>) -> Result<()>,
{
    run.validate()?;
    schedule.validate()?;
    let n = data.row_count();
    if n == 0 {
        return Err(Error::InvalidArgument("training data is empty".into()));
    }
    if data.col_count() != model.net.output_dim() {
        return Err(Error::shape(format!(
            "model generates {} features, data has {}",
            model.net.output_dim(),
            data.col_count()
        )));
    }
    let x: Matrix<f32> = data.data().cast();
    let width = x.cols();
    let mut rng = RandomSource::new(run.seed ^ 0x7472_6169_6e00_0000);
    let mut adam = AdamState::new(run.adam, &model.net);
    let mut trace = Vec::with_capacity(run.epochs);

    for epoch in 1..=run.epochs {
        let order = rng.permutation(n);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(run.batch_size) {
            let x0 = x.select_rows(batch);
            let sigmas = schedule.sample_training_sigma(&mut rng, batch.len());
            let eps = rng.gaussian_batch::<f32>(batch.len(), width);
            let (loss, grads) = batch_gradient(&model, &x0, &sigmas, &eps, run.deterministic)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            adam.update(&mut model.net, &grads)?;
            epoch_loss += loss * batch.len() as f64;
        }
        let mean_loss = epoch_loss / n as f64;
        if !mean_loss.is_finite() || !model.net.all_finite() {
            return Err(Error::Diverged { epoch });
        }
        trace.push(mean_loss);
        on_epoch(&EpochReport {
            epoch,
            mean_loss,
            model: &model,
            checkpoint_due: run.checkpoint_interval > 0 && epoch % run.checkpoint_interval == 0,
        })?;
    }
    Ok((model, trace))
}

fn batch_gradient(
    model: &DenoiserModel,
    x0: &Matrix<f32>,
    sigmas: &[f64],
    eps: &Matrix<f32>,
    deterministic: bool,
) -> Result<(f64, Gradients<f32>)> {
    let b = x0.rows();
    if deterministic || b <= PARALLEL_CHUNK {
        return model.loss_and_gradient(x0, sigmas, eps, b);
    }
    let starts: Vec<usize> = (0..b).step_by(PARALLEL_CHUNK).collect();
    let parts = starts
        .par_iter()
        .map(|&s| {
            let idx: Vec<usize> = (s..(s + PARALLEL_CHUNK).min(b)).collect();
            model.loss_and_gradient(&x0.select_rows(&idx), &sigmas[idx[0]..=idx[idx.len() - 1]], &eps.select_rows(&idx), b)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut iter = parts.into_iter();
    let (mut loss, mut grads) = iter.next().expect("batch is non-empty");
    for (l, g) in iter {
        loss += l;
        grads.add_assign(&g);
    }
    Ok((loss, grads))
}
