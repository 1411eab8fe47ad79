use crate::error::{Error, Result};
use crate::nn::{ForwardCache, Gradients, Matrix, Mlp, RandomSource};

use super::precond::{noise_embedding, precondition_coefficients};

/// Anything that maps a noisy batch at noise level `sigma` to a clean estimate.
pub trait Denoiser: Sync {
    /// Feature width `C` of the batches it accepts.
    fn width(&self) -> usize;

    fn denoise(&self, x: &Matrix<f64>, sigma: f64) -> Result<Matrix<f64>>;
}

/// Network `F` plus the preconditioning wrapper that turns it into a denoiser.
///
/// The network sees `C + 1` inputs: the (scaled) features and the noise
/// embedding `0.25 ln sigma` as one extra coordinate. With preconditioning off
/// the network output is used as the denoised estimate directly.
#[derive(Clone, Debug, PartialEq)]
pub struct DenoiserModel {
    pub net: Mlp<f32>,
    pub sigma_data: f64,
    pub precondition: bool,
}

/// Per-row scalings for a batch; identity scalings when preconditioning is off.
struct RowScales {
    skip: Vec<f64>,
    out: Vec<f64>,
    input: Vec<f64>,
    noise: Vec<f64>,
}

impl DenoiserModel {
    pub fn new(net: Mlp<f32>, sigma_data: f64, precondition: bool) -> Result<Self> {
        if net.input_dim() != net.output_dim() + 1 {
            return Err(Error::shape(format!(
                "denoiser network must map C+1 inputs to C outputs, got {} -> {}",
                net.input_dim(),
                net.output_dim()
            )));
        }
        if !(sigma_data > 0.0 && sigma_data.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma_data must be positive, got {sigma_data}"
            )));
        }
        Ok(Self {
            net,
            sigma_data,
            precondition,
        })
    }

    /// Freshly initialized model for `width` features and the given hidden widths.
    pub fn init(
        width: usize,
        hidden: &[usize],
        sigma_data: f64,
        precondition: bool,
        rng: &mut RandomSource,
    ) -> Result<Self> {
        if width == 0 {
            return Err(Error::shape("feature width must be positive"));
        }
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(width + 1);
        dims.extend_from_slice(hidden);
        dims.push(width);
        Self::new(Mlp::init(&dims, rng)?, sigma_data, precondition)
    }

    fn scales(&self, sigmas: &[f64]) -> Result<RowScales> {
        let n = sigmas.len();
        let mut s = RowScales {
            skip: Vec::with_capacity(n),
            out: Vec::with_capacity(n),
            input: Vec::with_capacity(n),
            noise: Vec::with_capacity(n),
        };
        for &sigma in sigmas {
            if self.precondition {
                let c = precondition_coefficients(sigma, self.sigma_data)?;
                s.skip.push(c.c_skip);
                s.out.push(c.c_out);
                s.input.push(c.c_in);
                s.noise.push(c.c_noise);
            } else {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "noise level must be positive, got {sigma}"
                    )));
                }
                s.skip.push(0.0);
                s.out.push(1.0);
                s.input.push(1.0);
                s.noise.push(noise_embedding(sigma));
            }
        }
        Ok(s)
    }

    fn network_input(&self, x: &Matrix<f32>, scales: &RowScales) -> Matrix<f32> {
        let c = x.cols();
        let mut input = Matrix::zeros(x.rows(), c + 1);
        for r in 0..x.rows() {
            let c_in = scales.input[r] as f32;
            let dst = input.row_mut(r);
            for (d, &v) in dst[..c].iter_mut().zip(x.row(r)) {
                *d = c_in * v;
            }
            dst[c] = scales.noise[r] as f32;
        }
        input
    }

    fn combine(&self, x: &Matrix<f32>, f: &Matrix<f32>, scales: &RowScales) -> Matrix<f32> {
        let mut d = Matrix::zeros(x.rows(), x.cols());
        for r in 0..x.rows() {
            let (skip, out) = (scales.skip[r] as f32, scales.out[r] as f32);
            for ((dv, &xv), &fv) in d.row_mut(r).iter_mut().zip(x.row(r)).zip(f.row(r)) {
                *dv = skip * xv + out * fv;
            }
        }
        d
    }

    fn check_width(&self, x: &Matrix<f32>, sigmas: &[f64]) -> Result<()> {
        if x.cols() != self.width() {
            return Err(Error::shape(format!(
                "denoiser expects {} features, got {}",
                self.width(),
                x.cols()
            )));
        }
        if sigmas.len() != x.rows() {
            return Err(Error::shape(format!(
                "{} noise levels for {} rows",
                sigmas.len(),
                x.rows()
            )));
        }
        Ok(())
    }

    /// Denoises each row at its own noise level.
    pub fn denoise_rows(&self, x: &Matrix<f32>, sigmas: &[f64]) -> Result<Matrix<f32>> {
        self.check_width(x, sigmas)?;
        let scales = self.scales(sigmas)?;
        let f = self.net.forward(&self.network_input(x, &scales))?;
        Ok(self.combine(x, &f, &scales))
    }

    /// Mean squared reconstruction error `mean_r ||D(x0 + sigma_r eps_r; sigma_r) - x0||^2`
    /// and its parameter gradient.
    ///
    /// `normalizer` is the batch size the mean is taken over; it differs from the
    /// row count only when a batch is processed in chunks. The returned loss is
    /// the chunk's contribution `sum_r ||.||^2 / normalizer`.
    pub fn loss_and_gradient(
        &self,
        x0: &Matrix<f32>,
        sigmas: &[f64],
        eps: &Matrix<f32>,
        normalizer: usize,
    ) -> Result<(f64, Gradients<f32>)> {
        let (loss, residual, scales, cache) = self.residual(x0, sigmas, eps)?;
        let scale = 2.0 / normalizer as f32;
        let mut out_grad = residual;
        for r in 0..out_grad.rows() {
            let k = scale * scales.out[r] as f32;
            for v in out_grad.row_mut(r) {
                *v *= k;
            }
        }
        let grads = self.net.backward(&cache, &out_grad)?;
        Ok((loss / normalizer as f64, grads))
    }

    /// Sum over rows of squared residual norms, plus what backprop needs.
    fn residual(
        &self,
        x0: &Matrix<f32>,
        sigmas: &[f64],
        eps: &Matrix<f32>,
    ) -> Result<(f64, Matrix<f32>, RowScales, ForwardCache<f32>)> {
        self.check_width(x0, sigmas)?;
        if eps.rows() != x0.rows() || eps.cols() != x0.cols() {
            return Err(Error::shape(format!(
                "noise is {}x{}, data is {}x{}",
                eps.rows(),
                eps.cols(),
                x0.rows(),
                x0.cols()
            )));
        }
        let mut noisy = x0.clone();
        for r in 0..noisy.rows() {
            let s = sigmas[r] as f32;
            for (v, &e) in noisy.row_mut(r).iter_mut().zip(eps.row(r)) {
                *v += s * e;
            }
        }
        let scales = self.scales(sigmas)?;
        let cache = self.net.forward_cached(&self.network_input(&noisy, &scales))?;
        let mut residual = self.combine(&noisy, cache.output(), &scales);
        let mut total = 0.0f64;
        for (d, &t) in residual.as_mut_slice().iter_mut().zip(x0.as_slice()) {
            *d -= t;
            total += (*d as f64) * (*d as f64);
        }
        Ok((total, residual, scales, cache))
    }
}

impl Denoiser for DenoiserModel {
    fn width(&self) -> usize {
        self.net.output_dim()
    }

    fn denoise(&self, x: &Matrix<f64>, sigma: f64) -> Result<Matrix<f64>> {
        let sigmas = vec![sigma; x.rows()];
        Ok(self.denoise_rows(&x.cast(), &sigmas)?.cast())
    }
}

/// Denoising objective `mean_r ||D(x0_r + sigma_r eps_r; sigma_r) - x0_r||^2`.
pub fn training_loss(model: &DenoiserModel, x0: &Matrix<f32>, sigmas: &[f64], eps: &Matrix<f32>) -> Result<f64> {
    if x0.rows() == 0 {
        return Err(Error::shape("empty batch"));
    }
    let (total, ..) = model.residual(x0, sigmas, eps)?;
    Ok(total / x0.rows() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Layer;

    fn zero_model(width: usize, precondition: bool) -> DenoiserModel {
        DenoiserModel::new(Mlp::zeros(&[width + 1, 8, width]).unwrap(), 0.5, precondition).unwrap()
    }

    #[test]
    fn zero_network_gives_skip_scaled_input() {
        let model = zero_model(3, true);
        let x = Matrix::from_rows(&[[1.0, -2.0, 0.5], [0.0, 4.0, 8.0]]).unwrap();
        for sigma in [0.02, 0.5, 80.0] {
            let d = model.denoise(&x, sigma).unwrap();
            let c = precondition_coefficients(sigma, 0.5).unwrap();
            for (a, b) in d.as_slice().iter().zip(x.as_slice()) {
                assert!((a - (c.c_skip as f32 as f64) * b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn small_sigma_returns_input() {
        let mut rng = RandomSource::new(3);
        let model = DenoiserModel::init(4, &[16], 0.5, true, &mut rng).unwrap();
        let x: Matrix<f64> = rng.gaussian_batch(5, 4);
        let d = model.denoise(&x, 1e-7).unwrap();
        for (a, b) in d.as_slice().iter().zip(x.as_slice()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn wrapper_matches_manual_coefficients() {
        let mut rng = RandomSource::new(21);
        let model = DenoiserModel::init(5, &[32, 32], 0.5, true, &mut rng).unwrap();
        let x: Matrix<f64> = rng.gaussian_batch(7, 5);
        for sigma in [0.03, 0.7, 12.0] {
            let c = precondition_coefficients(sigma, 0.5).unwrap();
            let mut input = Matrix::<f32>::zeros(7, 6);
            for r in 0..7 {
                for j in 0..5 {
                    input.set(r, j, (c.c_in * x.get(r, j)) as f32);
                }
                input.set(r, 5, c.c_noise as f32);
            }
            let f = model.net.forward(&input).unwrap();
            let d = model.denoise(&x, sigma).unwrap();
            for r in 0..7 {
                for j in 0..5 {
                    let manual = c.c_skip * x.get(r, j) + c.c_out * f.get(r, j) as f64;
                    assert!((d.get(r, j) - manual).abs() < 1e-6 * (1.0 + manual.abs()));
                }
            }
        }
    }

    #[test]
    fn disabled_preconditioning_is_raw_network() {
        let mut rng = RandomSource::new(4);
        let model = DenoiserModel::init(3, &[8], 0.5, false, &mut rng).unwrap();
        let x: Matrix<f64> = rng.gaussian_batch(2, 3);
        let mut input = Matrix::<f32>::zeros(2, 4);
        for r in 0..2 {
            for j in 0..3 {
                input.set(r, j, x.get(r, j) as f32);
            }
            input.set(r, 3, (0.25 * 2.0f64.ln()) as f32);
        }
        let f = model.net.forward(&input).unwrap();
        let d = model.denoise(&x, 2.0).unwrap();
        assert_eq!(d, f.cast());
    }

    #[test]
    fn perfect_denoiser_has_zero_loss() {
        // precondition off, F ignores features and outputs the constant x0 through its bias
        let x0 = [0.25f32, 0.75];
        let net = Mlp::new(vec![Layer {
            weight: Matrix::zeros(2, 3),
            bias: x0.to_vec(),
        }])
        .unwrap();
        let model = DenoiserModel::new(net, 0.5, false).unwrap();
        let batch = Matrix::from_rows(&[x0, x0, x0]).unwrap();
        let mut rng = RandomSource::new(1);
        let eps = rng.gaussian_batch(3, 2);
        let loss = training_loss(&model, &batch, &[0.1, 1.0, 10.0], &eps).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn shape_errors() {
        let model = zero_model(3, true);
        assert!(model.denoise(&Matrix::zeros(2, 4), 1.0).is_err());
        assert!(model.denoise(&Matrix::zeros(2, 3), 0.0).is_err());
        let x = Matrix::<f32>::zeros(2, 3);
        assert!(training_loss(&model, &x, &[1.0], &x).is_err());
        assert!(training_loss(&model, &x, &[1.0, 1.0], &Matrix::zeros(2, 2)).is_err());
        assert!(DenoiserModel::new(Mlp::zeros(&[3, 3]).unwrap(), 0.5, true).is_err());
    }
}
