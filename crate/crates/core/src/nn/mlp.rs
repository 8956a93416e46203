use rand::Rng;
use rand_distr::Uniform;

use super::{Matrix, PredictionMatrix};
use crate::error::{Error, Result};
use crate::seed;

/// Hidden-layer nonlinearity. The output layer is always linear (logits).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::Parse(format!("unknown activation `{other}`"))),
        }
    }
}

/// Affine layer `z = W a + b`, weights row-major `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    #[inline]
    fn weight_row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.in_dim..(o + 1) * self.in_dim]
    }
}

/// Dense feed-forward classifier: `layer_sizes = [input, hidden..., classes]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_sizes: Vec<usize>,
    layers: Vec<Dense>,
    activation: Activation,
}

/// Intermediate values of a batched forward pass, needed by [`MlpModel::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer (`inputs[0]` is the batch itself).
    inputs: Vec<Matrix>,
    /// Pre-activations of every hidden layer.
    pre: Vec<Matrix>,
    pub logits: Matrix,
}

/// Parameter gradients with the same layout as the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| Dense::zeros(l.in_dim, l.out_dim))
                .collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w *= s);
            l.bias.iter_mut().for_each(|b| *b *= s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }
}

fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::Shape(format!(
            "need at least input and output sizes, got {layer_sizes:?}"
        )));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::Shape(format!("zero-width layer in {layer_sizes:?}")));
    }
    Ok(())
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases, drawn from `seed`.
    pub fn new(layer_sizes: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let mut rng = seed::rng(seed);
        let layers = layer_sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit);
                let mut layer = Dense::zeros(fan_in, fan_out);
                layer.weights.iter_mut().for_each(|v| *v = rng.sample(dist));
                layer
            })
            .collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            layers,
            activation,
        })
    }

    pub fn zeros(layer_sizes: &[usize], activation: Activation) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let layers = layer_sizes
            .windows(2)
            .map(|w| Dense::zeros(w[0], w[1]))
            .collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            layers,
            activation,
        })
    }

    /// Assembles a model from explicit layers, checking that dimensions chain.
    pub fn from_layers(layers: Vec<Dense>, activation: Activation) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::Shape("model without layers".into()))?;
        let mut sizes = vec![first.in_dim];
        for (i, l) in layers.iter().enumerate() {
            if l.in_dim != *sizes.last().unwrap() {
                return Err(Error::Shape(format!(
                    "layer {i} expects {} inputs but receives {}",
                    l.in_dim,
                    sizes.last().unwrap()
                )));
            }
            if l.weights.len() != l.in_dim * l.out_dim || l.bias.len() != l.out_dim {
                return Err(Error::Shape(format!("layer {i} buffers do not match its dims")));
            }
            sizes.push(l.out_dim);
        }
        validate_sizes(&sizes)?;
        Ok(Self {
            layer_sizes: sizes,
            layers,
            activation,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::Shape(format!(
                "{} parameters supplied for a model with {}",
                params.len(),
                self.parameter_count()
            )));
        }
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[off..off + nw]);
            off += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    /// `params -= lr * grad`.
    pub fn apply_gradient(&mut self, grad: &Gradients, lr: f64) {
        for (l, g) in self.layers.iter_mut().zip(&grad.layers) {
            for (w, d) in l.weights.iter_mut().zip(&g.weights) {
                *w -= lr * d;
            }
            for (b, d) in l.bias.iter_mut().zip(&g.bias) {
                *b -= lr * d;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    fn check_input(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "batch has {} features, model expects {}",
                batch.cols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Logits for every row of `batch`.
    pub fn forward(&self, batch: &Matrix) -> Result<Matrix> {
        self.check_input(batch)?;
        let mut a = batch.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = affine(layer, &a);
            if i < last {
                z.as_mut_slice()
                    .iter_mut()
                    .for_each(|v| *v = self.activation.apply(*v));
            }
            a = z;
        }
        Ok(a)
    }

    /// Softmax outputs for every row of `batch`.
    pub fn predict_proba(&self, batch: &Matrix) -> Result<PredictionMatrix> {
        Ok(PredictionMatrix::from_logits(&self.forward(batch)?))
    }

    /// Forward pass retaining what backprop needs.
    pub fn forward_cached(&self, batch: &Matrix) -> Result<ForwardCache> {
        self.check_input(batch)?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut a = batch.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = affine(layer, &a);
            inputs.push(a);
            if i < last {
                let mut out = z.clone();
                out.as_mut_slice()
                    .iter_mut()
                    .for_each(|v| *v = self.activation.apply(*v));
                pre.push(z);
                a = out;
            } else {
                a = z;
            }
        }
        Ok(ForwardCache {
            inputs,
            pre,
            logits: a,
        })
    }

    /// Backpropagates `dlogits` (`batch × classes`) through a cached pass.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &Matrix) -> Result<Gradients> {
        if dlogits.rows() != cache.logits.rows() || dlogits.cols() != cache.logits.cols() {
            return Err(Error::Shape(format!(
                "upstream gradient is {}x{}, logits are {}x{}",
                dlogits.rows(),
                dlogits.cols(),
                cache.logits.rows(),
                cache.logits.cols()
            )));
        }
        let mut grads = Gradients::zeros_like(self);
        let mut delta = dlogits.clone();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &cache.inputs[l];
            let g = &mut grads.layers[l];
            for b in 0..delta.rows() {
                let d = delta.row(b);
                let a = input.row(b);
                for (o, &dv) in d.iter().enumerate() {
                    if dv == 0.0 {
                        continue;
                    }
                    g.bias[o] += dv;
                    let gw = &mut g.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (w, &x) in gw.iter_mut().zip(a) {
                        *w += dv * x;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let mut next = Matrix::zeros(delta.rows(), layer.in_dim);
            for b in 0..delta.rows() {
                let d = delta.row(b);
                let out = next.row_mut(b);
                for (o, &dv) in d.iter().enumerate() {
                    if dv == 0.0 {
                        continue;
                    }
                    for (n, &w) in out.iter_mut().zip(layer.weight_row(o)) {
                        *n += dv * w;
                    }
                }
            }
            let z = &cache.pre[l - 1];
            let a = input;
            for ((n, &zv), &av) in next
                .as_mut_slice()
                .iter_mut()
                .zip(z.as_slice())
                .zip(a.as_slice())
            {
                *n *= self.activation.derivative(zv, av);
            }
            delta = next;
        }
        Ok(grads)
    }

    /// Whether two models can be parameter-averaged.
    pub fn same_architecture(&self, other: &MlpModel) -> bool {
        self.layer_sizes == other.layer_sizes && self.activation == other.activation
    }
}

fn affine(layer: &Dense, a: &Matrix) -> Matrix {
    let mut z = Matrix::zeros(a.rows(), layer.out_dim);
    for b in 0..a.rows() {
        let x = a.row(b);
        let out = z.row_mut(b);
        for (o, zv) in out.iter_mut().enumerate() {
            let w = layer.weight_row(o);
            let mut s = layer.bias[o];
            for (wi, xi) in w.iter().zip(x) {
                s += wi * xi;
            }
            *zv = s;
        }
    }
    z
}
