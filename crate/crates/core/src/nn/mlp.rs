use crate::error::{Error, Result};

use super::matrix::{gemm_into, Matrix, Real};
use super::rng::RandomSource;

/// One affine map: `y = x W^T + b` with `W` stored `out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Layer<T> {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Matrix::zeros(output, input),
            bias: vec![T::ZERO; output],
        }
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    fn cast<U: Real>(&self) -> Layer<U> {
        Layer {
            weight: self.weight.cast(),
            bias: self.bias.iter().map(|b| U::from_f64(b.to_f64())).collect(),
        }
    }
}

/// Fully connected network: rectifier on every hidden layer, identity output.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    layers: Vec<Layer<T>>,
}

/// Parameter gradients, laid out exactly like the network they belong to.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Layer<T>>,
}

/// Layer activations recorded by [`Mlp::forward_cached`].
///
/// `activations[0]` is the input; `activations[l + 1]` is the output of layer `l`
/// (after the rectifier for hidden layers).
pub struct ForwardCache<T> {
    activations: Vec<Matrix<T>>,
}

impl<T: Real> ForwardCache<T> {
    pub fn output(&self) -> &Matrix<T> {
        self.activations.last().expect("cache holds at least the input")
    }
}

impl<T: Real> Mlp<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::shape("network needs at least one layer"));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.output_dim() {
                return Err(Error::shape(format!(
                    "layer {i}: bias length {} != output dim {}",
                    layer.bias.len(),
                    layer.output_dim()
                )));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::shape(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].output_dim(),
                    i + 1,
                    pair[1].input_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// All-zero network with the given layer widths `[in, h1, ..., out]`.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::shape("need at least input and output widths"));
        }
        Self::new(dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect())
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(dims: &[usize], rng: &mut RandomSource) -> Result<Self> {
        let mut net = Self::zeros(dims)?;
        for layer in &mut net.layers {
            let fan = (layer.input_dim() + layer.output_dim()) as f64;
            let limit = (6.0 / fan).sqrt();
            for w in layer.weight.as_mut_slice() {
                *w = T::from_f64(rng.uniform_range(-limit, limit));
            }
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    /// Widths `[in, h1, ..., out]`.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Layer::output_dim))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.len())
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.all_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    pub fn cast<U: Real>(&self) -> Mlp<U> {
        Mlp {
            layers: self.layers.iter().map(Layer::cast).collect(),
        }
    }

    fn check_input(&self, input: &Matrix<T>) -> Result<()> {
        if input.cols() != self.input_dim() {
            return Err(Error::shape(format!(
                "network expects {} input features, got {}",
                self.input_dim(),
                input.cols()
            )));
        }
        Ok(())
    }

    fn apply_layer(&self, l: usize, x: &Matrix<T>) -> Matrix<T> {
        let layer = &self.layers[l];
        let mut out = Matrix::zeros(x.rows(), layer.output_dim());
        for r in 0..out.rows() {
            out.row_mut(r).copy_from_slice(&layer.bias);
        }
        gemm_into(T::ONE, x.view(), layer.weight.view().t(), T::ONE, &mut out);
        if l + 1 < self.layers.len() {
            for v in out.as_mut_slice() {
                if !(*v > T::ZERO) {
                    *v = T::ZERO;
                }
            }
        }
        out
    }

    pub fn forward(&self, input: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_input(input)?;
        let mut x = self.apply_layer(0, input);
        for l in 1..self.layers.len() {
            x = self.apply_layer(l, &x);
        }
        Ok(x)
    }

    pub fn forward_cached(&self, input: &Matrix<T>) -> Result<ForwardCache<T>> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.clone());
        for l in 0..self.layers.len() {
            let next = self.apply_layer(l, &activations[l]);
            activations.push(next);
        }
        Ok(ForwardCache { activations })
    }

    /// Reverse-mode gradients of a scalar loss given its gradient at the output.
    pub fn backward(&self, cache: &ForwardCache<T>, output_grad: &Matrix<T>) -> Result<Gradients<T>> {
        let out = cache.output();
        if output_grad.rows() != out.rows() || output_grad.cols() != out.cols() {
            return Err(Error::shape(format!(
                "output gradient is {}x{}, network output is {}x{}",
                output_grad.rows(),
                output_grad.cols(),
                out.rows(),
                out.cols()
            )));
        }
        let depth = self.layers.len();
        let mut grads: Vec<Option<Layer<T>>> = vec![None; depth];
        let mut delta = output_grad.clone();
        for l in (0..depth).rev() {
            if l + 1 < depth {
                // rectifier derivative: pass-through where the activation fired
                let act = &cache.activations[l + 1];
                for (d, a) in delta.as_mut_slice().iter_mut().zip(act.as_slice()) {
                    if !(*a > T::ZERO) {
                        *d = T::ZERO;
                    }
                }
            }
            let input = &cache.activations[l];
            let weight = delta.t_matmul(input)?;
            let mut bias = vec![T::ZERO; delta.cols()];
            for row in delta.row_iter() {
                for (b, d) in bias.iter_mut().zip(row) {
                    *b += *d;
                }
            }
            if l > 0 {
                delta = delta.matmul(&self.layers[l].weight)?;
            }
            grads[l] = Some(Layer { weight, bias });
        }
        Ok(Gradients {
            layers: grads.into_iter().map(|g| g.expect("every layer visited")).collect(),
        })
    }

    /// Parameter gradients for `input` given the loss gradient at the output.
    pub fn gradient(&self, input: &Matrix<T>, output_grad: &Matrix<T>) -> Result<Gradients<T>> {
        let cache = self.forward_cached(input)?;
        self.backward(&cache, output_grad)
    }
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(net: &Mlp<T>) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Layer::zeros(l.input_dim(), l.output_dim()))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients<T>) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weight.as_mut_slice().iter_mut().zip(b.weight.as_slice()) {
                *x += *y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += *y;
            }
        }
    }

    pub fn is_congruent(&self, net: &Mlp<T>) -> bool {
        self.layers.len() == net.layers.len()
            && self.layers.iter().zip(&net.layers).all(|(g, p)| {
                g.input_dim() == p.input_dim()
                    && g.output_dim() == p.output_dim()
                    && g.bias.len() == p.bias.len()
            })
    }

    pub fn all_zero(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weight.as_slice().iter().all(|v| *v == T::ZERO) && l.bias.iter().all(|v| *v == T::ZERO)
        })
    }
}
