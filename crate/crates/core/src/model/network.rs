use std::fmt;
use std::str::FromStr;

use super::head::{head_backward, head_forward, HeadCache, SimilarityKind};
use crate::error::{ensure, Error, Result};
use crate::numerics::{Matrix, Rng, Scalar};
use crate::optim::Parameters;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }

    fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Relu => x.max(T::zero()),
            Activation::Tanh => x.tanh(),
        }
    }

    // Derivative expressed through the pre-activation `h` and output `a`.
    fn derivative<T: Scalar>(self, h: T, a: T) -> T {
        match self {
            Activation::Relu => {
                if h > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => T::one() - a * a,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::contract(format!(
                "unknown activation '{other}' (expected relu or tanh)"
            ))),
        }
    }
}

/// Shape of the dense feature extractor.
///
/// The extractor is `input_dim → hidden_dims… → feature_dim`. Hidden layers
/// apply `activation`; the last layer is linear, so features may take any
/// direction (this matters for 2-D angular plots).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BackboneConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub feature_dim: usize,
    pub activation: Activation,
}

impl BackboneConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.input_dim >= 1, "input_dim must be at least 1");
        ensure!(self.feature_dim >= 1, "feature_dim must be at least 1");
        ensure!(
            self.hidden_dims.iter().all(|&d| d >= 1),
            "hidden layer widths must be at least 1"
        );
        Ok(())
    }

    /// Widths of every layer boundary, input first.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden_dims.len() + 2);
        w.push(self.input_dim);
        w.extend_from_slice(&self.hidden_dims);
        w.push(self.feature_dim);
        w
    }
}

/// Fully connected layer, `y = x W + b` with `W` stored input×output.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub weight: Matrix<T>,
    pub bias: Matrix<T>,
}

impl<T: Scalar> Dense<T> {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Matrix::zeros(fan_in, fan_out),
            bias: Matrix::zeros(1, fan_out),
        }
    }

    fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let mut h = x.matmul(&self.weight)?;
        h.add_row_broadcast(self.bias.as_slice())?;
        Ok(h)
    }
}

/// Uniform fill in `[-limit, limit]`.
pub(crate) fn uniform_fill<T: Scalar>(m: &mut Matrix<T>, limit: f64, rng: &mut Rng) {
    for v in m.as_mut_slice() {
        *v = T::of(rng.uniform_in(-limit, limit));
    }
}

/// Glorot-uniform limit `√(6 / (fan_in + fan_out))`.
pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// He-uniform limit `√(6 / fan_in)`.
pub fn he_limit(fan_in: usize) -> f64 {
    (6.0 / fan_in as f64).sqrt()
}

#[derive(Clone, Debug)]
struct ForwardCache<T> {
    // inputs[l] is the input of layer l; pre[l] its pre-activation output.
    inputs: Vec<Matrix<T>>,
    pre: Vec<Matrix<T>>,
    features: Matrix<T>,
    head: HeadCache<T>,
}

/// Output of [`Network::forward`].
#[derive(Clone, Debug)]
pub struct ForwardOutput<T> {
    pub features: Matrix<T>,
    pub scores: Matrix<T>,
}

/// Dense backbone `f_θ` followed by a bias-free similarity classifier `W`
/// (D×C).
#[derive(Clone, Debug)]
pub struct Network<T> {
    config: BackboneConfig,
    similarity: SimilarityKind,
    layers: Vec<Dense<T>>,
    classifier: Matrix<T>,
    layer_grads: Vec<Dense<T>>,
    classifier_grad: Matrix<T>,
    cache: Option<ForwardCache<T>>,
}

impl<T: Scalar> Network<T> {
    /// Randomly initialized network: He-uniform hidden layers under ReLU,
    /// Glorot-uniform under tanh and for the linear feature layer and the
    /// classifier; zero biases.
    pub fn new(
        config: BackboneConfig,
        num_classes: usize,
        similarity: SimilarityKind,
        rng: &mut Rng,
    ) -> Result<Self> {
        let mut net = Self::zeros(config, num_classes, similarity)?;
        let n_layers = net.layers.len();
        let activation = net.config.activation;
        for (l, layer) in net.layers.iter_mut().enumerate() {
            let (fan_in, fan_out) = layer.weight.shape();
            let limit = if l + 1 < n_layers && activation == Activation::Relu {
                he_limit(fan_in)
            } else {
                glorot_limit(fan_in, fan_out)
            };
            uniform_fill(&mut layer.weight, limit, rng);
        }
        let (d, c) = net.classifier.shape();
        uniform_fill(&mut net.classifier, glorot_limit(d, c), rng);
        Ok(net)
    }

    /// Network with every parameter zero.
    pub fn zeros(
        config: BackboneConfig,
        num_classes: usize,
        similarity: SimilarityKind,
    ) -> Result<Self> {
        config.validate()?;
        ensure!(num_classes >= 1, "classifier needs at least one class");
        let widths = config.widths();
        let layers: Vec<Dense<T>> = widths
            .windows(2)
            .map(|w| Dense::zeros(w[0], w[1]))
            .collect();
        let layer_grads = layers.clone();
        Ok(Self {
            classifier: Matrix::zeros(config.feature_dim, num_classes),
            classifier_grad: Matrix::zeros(config.feature_dim, num_classes),
            config,
            similarity,
            layers,
            layer_grads,
            cache: None,
        })
    }

    pub fn config(&self) -> &BackboneConfig {
        &self.config
    }

    pub fn similarity(&self) -> SimilarityKind {
        self.similarity
    }

    pub fn num_classes(&self) -> usize {
        self.classifier.cols()
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense<T>] {
        self.cache = None;
        &mut self.layers
    }

    pub fn classifier(&self) -> &Matrix<T> {
        &self.classifier
    }

    pub fn set_classifier(&mut self, w: Matrix<T>) -> Result<()> {
        ensure!(
            w.shape() == self.classifier.shape(),
            "classifier must be {}x{}, got {}x{}",
            self.classifier.rows(),
            self.classifier.cols(),
            w.rows(),
            w.cols()
        );
        self.classifier = w;
        self.cache = None;
        Ok(())
    }

    pub fn layer_grads(&self) -> &[Dense<T>] {
        &self.layer_grads
    }

    pub fn classifier_grad(&self) -> &Matrix<T> {
        &self.classifier_grad
    }

    fn check_batch(&self, batch: &Matrix<T>) -> Result<()> {
        ensure!(
            batch.cols() == self.config.input_dim,
            "batch width {} does not match input_dim {}",
            batch.cols(),
            self.config.input_dim
        );
        Ok(())
    }

    /// Backbone features `z = f_θ(x)` without touching the forward cache.
    pub fn embed(&self, batch: &Matrix<T>) -> Result<Matrix<T>> {
        self.check_batch(batch)?;
        let last = self.layers.len() - 1;
        let mut x = batch.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let h = layer.forward(&x)?;
            x = if l < last {
                h.map(|v| self.config.activation.apply(v))
            } else {
                h
            };
        }
        Ok(x)
    }

    /// Scores of a batch without touching the forward cache.
    pub fn scores(&self, batch: &Matrix<T>) -> Result<Matrix<T>> {
        let z = self.embed(batch)?;
        Ok(head_forward(&z, &self.classifier, self.similarity)?.0)
    }

    /// Forward pass that caches activations for [`Network::backward`].
    pub fn forward(&mut self, batch: &Matrix<T>) -> Result<ForwardOutput<T>> {
        self.check_batch(batch)?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = batch.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let h = layer.forward(&x)?;
            let next = if l < last {
                h.map(|v| self.config.activation.apply(v))
            } else {
                h.clone()
            };
            inputs.push(x);
            pre.push(h);
            x = next;
        }
        let (scores, head) = head_forward(&x, &self.classifier, self.similarity)?;
        self.cache = Some(ForwardCache {
            inputs,
            pre,
            features: x.clone(),
            head,
        });
        Ok(ForwardOutput {
            features: x,
            scores,
        })
    }

    /// Fills the gradient buffers from `upstream`, the gradient of the
    /// objective w.r.t. the scores of the last forward batch.
    pub fn backward(&mut self, upstream: &Matrix<T>) -> Result<()> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::contract("backward called without a cached forward pass"))?;
        let (grad_z, grad_w) =
            head_backward(&cache.features, &self.classifier, &cache.head, upstream)?;
        self.classifier_grad = grad_w;

        let last = self.layers.len() - 1;
        let mut grad = grad_z;
        for l in (0..self.layers.len()).rev() {
            if l < last {
                // grad currently holds dL/da_l; turn it into dL/dh_l.
                let h = &cache.pre[l];
                let a_in = &cache.inputs[l + 1];
                let act = self.config.activation;
                for ((g, &hv), &av) in grad
                    .as_mut_slice()
                    .iter_mut()
                    .zip(h.as_slice())
                    .zip(a_in.as_slice())
                {
                    *g *= act.derivative(hv, av);
                }
            }
            let x = &cache.inputs[l];
            self.layer_grads[l].weight = x.t_matmul(&grad)?;
            self.layer_grads[l].bias = grad.column_sums();
            if l > 0 {
                grad = grad.matmul_t(&self.layers[l].weight)?;
            }
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for g in &mut self.layer_grads {
            g.weight.fill(T::zero());
            g.bias.fill(T::zero());
        }
        self.classifier_grad.fill(T::zero());
    }

    /// Total number of scalar parameters.
    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.as_slice().len() + l.bias.as_slice().len())
            .sum::<usize>()
            + self.classifier.as_slice().len()
    }

    /// Named parameter tensors in a fixed order.
    pub fn named_parameters(&self) -> Vec<(String, &Matrix<T>)> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            out.push((format!("layer{l}.weight"), &layer.weight));
            out.push((format!("layer{l}.bias"), &layer.bias));
        }
        out.push(("classifier".to_string(), &self.classifier));
        out
    }
}

impl<T: Scalar> Parameters<T> for Network<T> {
    fn visit_parameters(
        &mut self,
        f: &mut dyn FnMut(&str, &mut Matrix<T>, &mut Matrix<T>) -> Result<()>,
    ) -> Result<()> {
        self.cache = None;
        for (l, (layer, grad)) in self
            .layers
            .iter_mut()
            .zip(self.layer_grads.iter_mut())
            .enumerate()
        {
            f(&format!("layer{l}.weight"), &mut layer.weight, &mut grad.weight)?;
            f(&format!("layer{l}.bias"), &mut layer.bias, &mut grad.bias)?;
        }
        f("classifier", &mut self.classifier, &mut self.classifier_grad)
    }
}
