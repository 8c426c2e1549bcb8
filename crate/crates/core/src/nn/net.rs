use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use crate::error::{Error, Result};
use crate::rng::substream;

/// Supervised nets emit one output per class and see only `y`; unsupervised
/// nets see the concatenation `x || y` and emit a scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NetMode {
    Supervised { classes: usize },
    Unsupervised,
}

impl NetMode {
    pub fn output_dim(&self) -> usize {
        match *self {
            NetMode::Supervised { classes } => classes,
            NetMode::Unsupervised => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `inputs x outputs`, so a batch forward is `x.dot(w) + b`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn input_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.ncols()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub mode: NetMode,
    pub dropout: f64,
    pub seed: u64,
}

impl NetConfig {
    /// Two hidden layers of 100 LeakyReLU units.
    pub fn standard(input_dim: usize, mode: NetMode, output_activation: Activation, seed: u64) -> Self {
        NetConfig {
            input_dim,
            hidden: vec![100, 100],
            hidden_activation: Activation::leaky_relu(),
            output_activation,
            mode,
            dropout: 0.0,
            seed,
        }
    }
}

/// Dense feedforward discriminator.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorNet {
    layers: Vec<Layer>,
    dropout: f64,
    mode: NetMode,
    seed: u64,
    version: u64,
}

/// Everything the backward pass needs from one forward call.
#[derive(Debug, Clone)]
pub struct Tape {
    version: u64,
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    post: Vec<Array2<f64>>,
    masks: Vec<Option<Array2<f64>>>,
}

impl Tape {
    pub fn output(&self) -> &Array2<f64> {
        self.post.last().expect("network has at least one layer")
    }

    pub fn into_output(mut self) -> Array2<f64> {
        self.post.pop().expect("network has at least one layer")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    pub fn zeros_like(net: &DiscriminatorNet) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: Array2::zeros(l.weights.raw_dim()),
                    bias: Array1::zeros(l.bias.raw_dim()),
                })
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| {
            l.weights.iter().all(|v| v.is_finite()) && l.bias.iter().all(|v| v.is_finite())
        })
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights += &b.weights;
            a.bias += &b.bias;
        }
    }

    /// Parameter tensors in the order used by [`DiscriminatorNet::params_flat`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    l.weights.as_slice().expect("standard layout"),
                    l.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }
}

impl DiscriminatorNet {
    pub fn new(config: &NetConfig) -> Result<Self> {
        if config.input_dim == 0 {
            return Err(Error::config("input_dim", "must be positive"));
        }
        if let Some(pos) = config.hidden.iter().position(|&h| h == 0) {
            return Err(Error::config("hidden", format!("layer {pos} has zero width")));
        }
        let mut rng = substream(config.seed, "init");
        let mut dims = vec![config.input_dim];
        dims.extend(&config.hidden);
        dims.push(config.mode.output_dim());
        let n_layers = dims.len() - 1;
        let layers = (0..n_layers)
            .map(|i| {
                let activation = if i + 1 == n_layers {
                    config.output_activation
                } else {
                    config.hidden_activation
                };
                let (fan_in, fan_out) = (dims[i], dims[i + 1]);
                let limit = match activation {
                    Activation::LeakyRelu(_) => (6.0 / fan_in as f64).sqrt(),
                    _ => (6.0 / (fan_in + fan_out) as f64).sqrt(),
                };
                let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
                Layer {
                    weights: Array2::from_shape_simple_fn((fan_in, fan_out), || dist.sample(&mut rng)),
                    bias: Array1::zeros(fan_out),
                    activation,
                }
            })
            .collect();
        Self::from_layers(layers, config.mode, config.dropout, config.seed)
    }

    pub fn from_layers(layers: Vec<Layer>, mode: NetMode, dropout: f64, seed: u64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("layers"));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::config("dropout", format!("rate must be in [0, 1), got {dropout}")));
        }
        if let NetMode::Supervised { classes } = mode {
            if classes == 0 {
                return Err(Error::config("classes", "must be positive"));
            }
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.output_dim() {
                return Err(Error::Shape(format!(
                    "layer {i}: bias has {} entries for {} outputs",
                    layer.bias.len(),
                    layer.output_dim()
                )));
            }
            if i > 0 && layers[i - 1].output_dim() != layer.input_dim() {
                return Err(Error::Shape(format!(
                    "layer {i} expects {} inputs but layer {} produces {}",
                    layer.input_dim(),
                    i - 1,
                    layers[i - 1].output_dim()
                )));
            }
            if layer.activation == Activation::Softmax && i + 1 != layers.len() {
                return Err(Error::config("activation", "softmax is only allowed on the output layer"));
            }
        }
        let out = layers.last().unwrap().output_dim();
        if out != mode.output_dim() {
            return Err(Error::Shape(format!(
                "{mode:?} network needs {} outputs, last layer has {out}",
                mode.output_dim()
            )));
        }
        Ok(DiscriminatorNet {
            layers,
            dropout,
            mode,
            seed,
            version: 0,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn mode(&self) -> NetMode {
        self.mode
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    /// Incremented on every parameter change; tapes from older versions are
    /// rejected by [`DiscriminatorNet::backward`].
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn output_activation(&self) -> Activation {
        self.layers.last().unwrap().activation
    }

    /// Replace the output activation, keeping weights.
    pub fn set_output_activation(&mut self, activation: Activation) {
        self.layers.last_mut().unwrap().activation = activation;
        self.version += 1;
    }

    /// Evaluation-mode forward pass (no dropout).
    pub fn forward(&self, inputs: ArrayView2<f64>) -> Result<Tape> {
        self.run(inputs, None)
    }

    /// Training-mode forward pass; dropout masks come from `rng`.
    pub fn forward_train<R: Rng>(&self, inputs: ArrayView2<f64>, rng: &mut R) -> Result<Tape> {
        self.run(inputs, Some(rng))
    }

    pub fn predict(&self, inputs: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut x = self.check_input(inputs)?.to_owned();
        for layer in &self.layers {
            let z = x.dot(&layer.weights) + &layer.bias;
            x = layer.activation.apply(&z);
        }
        Ok(x)
    }

    fn check_input<'a>(&self, inputs: ArrayView2<'a, f64>) -> Result<ArrayView2<'a, f64>> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                inputs.ncols(),
                self.input_dim()
            )));
        }
        Ok(inputs)
    }

    fn run(&self, inputs: ArrayView2<f64>, mut rng: Option<&mut dyn RngCore>) -> Result<Tape> {
        let inputs = self.check_input(inputs)?;
        let n = self.layers.len();
        let mut tape = Tape {
            version: self.version,
            inputs: Vec::with_capacity(n),
            pre: Vec::with_capacity(n),
            post: Vec::with_capacity(n),
            masks: Vec::with_capacity(n),
        };
        let mut x = inputs.to_owned();
        let keep = 1.0 - self.dropout;
        for (i, layer) in self.layers.iter().enumerate() {
            let z = x.dot(&layer.weights) + &layer.bias;
            let a = layer.activation.apply(&z);
            let mask = match rng.as_deref_mut() {
                Some(rng) if self.dropout > 0.0 && i + 1 < n => {
                    Some(Array2::from_shape_simple_fn(a.raw_dim(), || {
                        if rng.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    }))
                }
                _ => None,
            };
            tape.inputs.push(x);
            tape.pre.push(z);
            // `post` keeps the unmasked activation for the activation
            // derivative; the next layer sees the masked one.
            x = match &mask {
                Some(m) => &a * m,
                None => a.clone(),
            };
            tape.post.push(a);
            tape.masks.push(mask);
        }
        // the final output is never masked
        debug_assert!(tape.masks.last().is_none_or(|m| m.is_none()));
        Ok(tape)
    }

    /// Reverse pass: parameter gradients of a scalar loss whose gradient with
    /// respect to the network output is `output_grad`.
    pub fn backward(&self, tape: &Tape, output_grad: ArrayView2<f64>) -> Result<Gradients> {
        if tape.version != self.version {
            return Err(Error::StaleTape {
                tape: tape.version,
                net: self.version,
            });
        }
        if output_grad.raw_dim() != tape.output().raw_dim() {
            return Err(Error::Shape(format!(
                "output gradient shape {:?} does not match output {:?}",
                output_grad.shape(),
                tape.output().shape()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut grad_post = output_grad.to_owned();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            if let Some(mask) = &tape.masks[i] {
                grad_post *= mask;
            }
            let grad_pre = layer
                .activation
                .backward(&tape.pre[i], &tape.post[i], grad_post.view());
            let gw = tape.inputs[i].t().dot(&grad_pre).as_standard_layout().into_owned();
            let gb = grad_pre.sum_axis(Axis(0));
            if i > 0 {
                grad_post = grad_pre.dot(&layer.weights.t());
            }
            grads.push(LayerGrad {
                weights: gw,
                bias: gb,
            });
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_params_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                values.len()
            )));
        }
        let mut it = values.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        self.version += 1;
        Ok(())
    }

    /// Mutable parameter tensors in the same order as [`Gradients::tensors`].
    /// Bumps the version, invalidating outstanding tapes.
    pub fn param_tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.version += 1;
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.weights.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}
