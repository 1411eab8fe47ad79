use crate::error::{Error, Result};

use super::matrix::Real;
use super::mlp::{Gradients, Layer, Mlp};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected adaptive-moment optimizer state for one network.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    first_moment: Vec<Layer<T>>,
    second_moment: Vec<Layer<T>>,
    step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(config: AdamConfig, net: &Mlp<T>) -> Self {
        let zeros: Vec<Layer<T>> = net
            .layers()
            .iter()
            .map(|l| Layer::zeros(l.input_dim(), l.output_dim()))
            .collect();
        Self {
            config,
            first_moment: zeros.clone(),
            second_moment: zeros,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[Layer<T>] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[Layer<T>] {
        &self.second_moment
    }

    /// Applies one update to `params` in place.
    pub fn update(&mut self, params: &mut Mlp<T>, grads: &Gradients<T>) -> Result<()> {
        if !grads.is_congruent(params)
            || self.first_moment.len() != params.layers().len()
            || self
                .first_moment
                .iter()
                .zip(params.layers())
                .any(|(m, p)| m.input_dim() != p.input_dim() || m.output_dim() != p.output_dim())
        {
            return Err(Error::shape("optimizer state, parameters and gradients are not congruent"));
        }
        self.step += 1;
        let cfg = self.config;
        let t = self.step as i32;
        let correction1 = 1.0 - cfg.beta1.powi(t);
        let correction2 = 1.0 - cfg.beta2.powi(t);
        let b1 = T::from_f64(cfg.beta1);
        let b2 = T::from_f64(cfg.beta2);
        let one_b1 = T::from_f64(1.0 - cfg.beta1);
        let one_b2 = T::from_f64(1.0 - cfg.beta2);
        let step_size = T::from_f64(cfg.learning_rate / correction1);
        let inv_sqrt_c2 = T::from_f64(1.0 / correction2.sqrt());
        let eps = T::from_f64(cfg.eps);

        let update = |p: &mut [T], g: &[T], m: &mut [T], v: &mut [T]| {
            for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + one_b1 * g;
                *v = b2 * *v + one_b2 * g * g;
                *p -= step_size * *m / ((*v).sqrt() * inv_sqrt_c2 + eps);
            }
        };

        for (((p, g), m), v) in params
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            update(
                p.weight.as_mut_slice(),
                g.weight.as_slice(),
                m.weight.as_mut_slice(),
                v.weight.as_mut_slice(),
            );
            update(&mut p.bias, &g.bias, &mut m.bias, &mut v.bias);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::matrix::Matrix;
    use crate::nn::rng::RandomSource;

    fn scalar_net(x: f64) -> Mlp<f64> {
        Mlp::new(vec![Layer {
            weight: Matrix::from_rows(&[[x]]).unwrap(),
            bias: vec![0.0],
        }])
        .unwrap()
    }

    fn scalar_grad(g: f64) -> Gradients<f64> {
        Gradients {
            layers: vec![Layer {
                weight: Matrix::from_rows(&[[g]]).unwrap(),
                bias: vec![0.0],
            }],
        }
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut rng = RandomSource::new(8);
        let mut net = Mlp::<f64>::init(&[3, 5, 2], &mut rng).unwrap();
        let before = net.clone();
        let mut state = AdamState::new(AdamConfig::default(), &net);
        // prime the moments so decay is observable
        let mut g = Gradients::zeros_like(&net);
        g.layers[0].bias[0] = 1.0;
        state.update(&mut net, &g).unwrap();
        let m_before = state.first_moment()[0].bias[0];
        let primed = net.clone();
        assert_ne!(primed, before);
        for _ in 0..5 {
            let zero = Gradients::zeros_like(&net);
            let snapshot = net.clone();
            state.update(&mut net, &zero).unwrap();
            // first-moment residue still moves the primed coordinate only
            for (a, b) in net.layers()[0].weight.as_slice().iter().zip(snapshot.layers()[0].weight.as_slice()) {
                assert_eq!(a, b);
            }
        }
        assert!(state.first_moment()[0].bias[0].abs() < m_before.abs());
        assert_eq!(state.step_count(), 6);
    }

    #[test]
    fn zero_gradient_from_fresh_state_leaves_params_unchanged() {
        let mut rng = RandomSource::new(9);
        let mut net = Mlp::<f32>::init(&[4, 4, 1], &mut rng).unwrap();
        let before = net.clone();
        let mut state = AdamState::new(AdamConfig::default(), &net);
        for _ in 0..10 {
            state.update(&mut net, &Gradients::zeros_like(&before)).unwrap();
        }
        assert_eq!(net, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        for g in [3.0, -0.02, 1e-3] {
            let mut net = scalar_net(1.0);
            let mut state = AdamState::new(AdamConfig::default(), &net);
            state.update(&mut net, &scalar_grad(g)).unwrap();
            let delta = net.layers()[0].weight.get(0, 0) - 1.0;
            assert!(delta.signum() == -g.signum());
            assert!((delta.abs() - 3e-4).abs() < 1e-7, "delta {delta}");
        }
    }

    #[test]
    fn minimizes_scalar_quadratic() {
        let mut net = scalar_net(1.0);
        let cfg = AdamConfig {
            learning_rate: 0.1,
            ..AdamConfig::default()
        };
        let mut state = AdamState::new(cfg, &net);
        for _ in 0..200 {
            let x = net.layers()[0].weight.get(0, 0);
            state.update(&mut net, &scalar_grad(2.0 * x)).unwrap();
        }
        let x = net.layers()[0].weight.get(0, 0);
        assert!(x.abs() < 0.05, "x = {x}");
    }

    #[test]
    fn rejects_incongruent_gradients() {
        let mut net = Mlp::<f64>::zeros(&[2, 3]).unwrap();
        let other = Mlp::<f64>::zeros(&[2, 4]).unwrap();
        let mut state = AdamState::new(AdamConfig::default(), &net);
        assert!(state.update(&mut net, &Gradients::zeros_like(&other)).is_err());
        assert_eq!(state.step_count(), 0);
    }
}
