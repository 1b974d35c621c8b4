use rand::distr::{Distribution, Uniform};
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

pub const DEFAULT_NEGATIVE_SLOPE: f64 = 0.15;

/// Hidden-layer activation. The output layer is always affine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakyRelu {
    pub negative_slope: f64,
}

impl Default for LeakyRelu {
    fn default() -> Self {
        Self {
            negative_slope: DEFAULT_NEGATIVE_SLOPE,
        }
    }
}

impl LeakyRelu {
    pub fn new(negative_slope: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&negative_slope) {
            return Err(Error::InvalidArchitecture(format!(
                "negative slope {negative_slope} is outside [0, 1)"
            )));
        }
        Ok(Self { negative_slope })
    }

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        if z >= 0.0 {
            z
        } else {
            self.negative_slope * z
        }
    }

    /// Derivative, taking the positive branch at exactly zero.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        if z >= 0.0 {
            1.0
        } else {
            self.negative_slope
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// Entries uniform on `[-L, L]` with `L = sqrt(6 / (fan_in + fan_out))`.
    #[default]
    GlorotUniform,
    /// Entries normal with standard deviation `sqrt(2 / (fan_in + fan_out))`.
    GlorotNormal,
}

/// Parameters of one affine layer. `weights` is `(out, in)` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

/// Fully connected feed-forward network: leaky-ReLU hidden layers and a
/// linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    dims: Vec<usize>,
    layers: Vec<Layer>,
    activation: LeakyRelu,
    init: Init,
    seed: u64,
}

pub fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::InvalidArchitecture(format!(
            "need at least an input and an output dimension, got {dims:?}"
        )));
    }
    if let Some(pos) = dims.iter().position(|&d| d < 1) {
        return Err(Error::InvalidArchitecture(format!(
            "dimension {pos} is zero in {dims:?}"
        )));
    }
    Ok(())
}

/// Glorot-uniform initialization with zero biases.
pub fn glorot_init(dims: &[usize], seed: u64) -> Result<DenseNet> {
    DenseNet::new(dims, LeakyRelu::default(), Init::GlorotUniform, seed)
}

impl DenseNet {
    pub fn new(dims: &[usize], activation: LeakyRelu, init: Init, seed: u64) -> Result<Self> {
        validate_dims(dims)?;
        LeakyRelu::new(activation.negative_slope)?;
        let mut rng = seed::rng(seed);
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let n = fan_in * fan_out;
                let weights: Vec<f64> = match init {
                    Init::GlorotUniform => {
                        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                        let dist = Uniform::new_inclusive(-limit, limit)
                            .expect("finite positive Glorot bound");
                        (0..n).map(|_| dist.sample(&mut rng)).collect()
                    }
                    Init::GlorotNormal => {
                        let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
                        let dist = Normal::new(0.0, std).expect("positive Glorot std");
                        (0..n).map(|_| dist.sample(&mut rng)).collect()
                    }
                };
                Layer {
                    weights,
                    biases: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(Self {
            dims: dims.to_vec(),
            layers,
            activation,
            init,
            seed,
        })
    }

    /// Assemble a network from explicit parameters.
    pub fn from_layers(dims: &[usize], layers: Vec<Layer>, activation: LeakyRelu) -> Result<Self> {
        validate_dims(dims)?;
        LeakyRelu::new(activation.negative_slope)?;
        if layers.len() != dims.len() - 1 {
            return Err(Error::InvalidArchitecture(format!(
                "{} layers given for dims {dims:?}",
                layers.len()
            )));
        }
        for (k, (layer, w)) in layers.iter().zip(dims.windows(2)).enumerate() {
            if layer.weights.len() != w[0] * w[1] || layer.biases.len() != w[1] {
                return Err(Error::InvalidArchitecture(format!(
                    "layer {k} expects a {}x{} weight matrix and {} biases",
                    w[1], w[0], w[1]
                )));
            }
        }
        Ok(Self {
            dims: dims.to_vec(),
            layers,
            activation,
            init: Init::GlorotUniform,
            seed: 0,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("validated dims")
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn activation(&self) -> LeakyRelu {
        self.activation
    }

    pub fn init(&self) -> Init {
        self.init
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// All parameters in layer order, each layer's weights then its biases.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_params_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "{} parameters given, network has {}",
                values.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&values[offset..offset + nw]);
            offset += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&values[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} features, network expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut current = x.clone();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = affine(layer, &current, self.dims[k + 1]);
            if k < last {
                z.as_mut_slice()
                    .iter_mut()
                    .for_each(|v| *v = self.activation.apply(*v));
            }
            current = z;
        }
        Ok(current)
    }

    pub fn forward_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let m = Matrix::from_vec(1, x.len(), x.to_vec())?;
        Ok(self.forward(&m)?.into_vec())
    }

    /// Forward pass keeping every layer input and pre-activation for `backward_trace`.
    pub fn trace(&self, x: &Matrix) -> Result<Trace> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut current = x.clone();
        for (k, layer) in self.layers.iter().enumerate() {
            let z = affine(layer, &current, self.dims[k + 1]);
            let next = if k < last {
                let mut a = z.clone();
                a.as_mut_slice()
                    .iter_mut()
                    .for_each(|v| *v = self.activation.apply(*v));
                a
            } else {
                z.clone()
            };
            inputs.push(current);
            pre.push(z);
            current = next;
        }
        Ok(Trace {
            inputs,
            pre,
            output: current,
        })
    }

    /// Gradient of `sum_i <output_grad_i, forward(x_i)>` with respect to the parameters.
    pub fn backward(&self, x: &Matrix, output_grad: &Matrix) -> Result<Gradients> {
        let trace = self.trace(x)?;
        Ok(self.backward_trace(&trace, output_grad, false)?.0)
    }

    /// Reverse pass over a recorded trace. When `want_input_grad` is set the
    /// gradient with respect to the network input is returned as well.
    pub fn backward_trace(
        &self,
        trace: &Trace,
        output_grad: &Matrix,
        want_input_grad: bool,
    ) -> Result<(Gradients, Option<Matrix>)> {
        let batch = trace.output.rows();
        if output_grad.rows() != batch || output_grad.cols() != self.output_dim() {
            return Err(Error::Shape(format!(
                "output gradient is {}x{}, forward output is {}x{}",
                output_grad.rows(),
                output_grad.cols(),
                batch,
                self.output_dim()
            )));
        }
        let mut grads = Gradients::zeros_like(self);
        let mut delta = output_grad.clone();
        let mut input_grad = None;
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let (n_in, n_out) = (self.dims[k], self.dims[k + 1]);
            let a = &trace.inputs[k];
            let g = &mut grads.layers[k];
            for i in 0..batch {
                let d = delta.row(i);
                let ai = a.row(i);
                for o in 0..n_out {
                    let dio = d[o];
                    g.biases[o] += dio;
                    let gw = &mut g.weights[o * n_in..(o + 1) * n_in];
                    for (w, &av) in gw.iter_mut().zip(ai) {
                        *w += dio * av;
                    }
                }
            }
            if k == 0 && !want_input_grad {
                break;
            }
            let mut da = Matrix::zeros(batch, n_in);
            for i in 0..batch {
                let d = delta.row(i);
                let out = da.row_mut(i);
                for o in 0..n_out {
                    let dio = d[o];
                    let w = &layer.weights[o * n_in..(o + 1) * n_in];
                    for (acc, &wv) in out.iter_mut().zip(w) {
                        *acc += dio * wv;
                    }
                }
            }
            if k == 0 {
                input_grad = Some(da);
                break;
            }
            let z = &trace.pre[k - 1];
            for (v, &zv) in da.as_mut_slice().iter_mut().zip(z.as_slice()) {
                *v *= self.activation.derivative(zv);
            }
            delta = da;
        }
        Ok((grads, input_grad))
    }
}

fn affine(layer: &Layer, x: &Matrix, n_out: usize) -> Matrix {
    let n_in = x.cols();
    let mut z = Matrix::zeros(x.rows(), n_out);
    for i in 0..x.rows() {
        let xi = x.row(i);
        let zi = z.row_mut(i);
        for (o, zo) in zi.iter_mut().enumerate() {
            let w = &layer.weights[o * n_in..(o + 1) * n_in];
            let mut acc = 0.0;
            for (&wv, &xv) in w.iter().zip(xi) {
                acc += wv * xv;
            }
            *zo = acc + layer.biases[o];
        }
    }
    z
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
    output: Matrix,
}

impl Trace {
    pub fn output(&self) -> &Matrix {
        &self.output
    }
}

/// Parameter gradients, shaped like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Layer {
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    /// `self += other`, elementwise.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights
                .iter_mut()
                .zip(&b.weights)
                .for_each(|(x, y)| *x += y);
            a.biases
                .iter_mut()
                .zip(&b.biases)
                .for_each(|(x, y)| *x += y);
        }
    }

    /// Index of the first layer holding a non-finite entry.
    pub fn first_non_finite_layer(&self) -> Option<usize> {
        self.layers.iter().position(|l| {
            l.weights
                .iter()
                .chain(&l.biases)
                .any(|v| !v.is_finite())
        })
    }

    pub fn matches(&self, net: &DenseNet) -> bool {
        self.layers.len() == net.layers.len()
            && self.layers.iter().zip(&net.layers).all(|(g, l)| {
                g.weights.len() == l.weights.len() && g.biases.len() == l.biases.len()
            })
    }
}
