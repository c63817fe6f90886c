//! Fixed-architecture multilayer perceptrons.
//!
//! Hidden layers share one activation; the output layer is always linear.
//! Parameters are flattened layer by layer as `weights (row-major, out x in)`
//! followed by `bias`.

use rand::distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::DenseArray;
use crate::error::{check_len, Error, Result};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One affine layer `z = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weights: DenseArray,
    bias: DenseArray,
}

impl Layer {
    /// `weights` has shape `[out, in]`, `bias` shape `[out]`.
    pub fn new(weights: DenseArray, bias: DenseArray) -> Result<Self> {
        if weights.shape().len() != 2 {
            return Err(Error::InvalidParameter(
                "layer weights must be a matrix".into(),
            ));
        }
        check_len("layer bias", weights.shape()[0], bias.len())?;
        Ok(Self { weights, bias })
    }

    /// Builds a layer from nested rows.
    pub fn from_rows(rows: &[&[f64]], bias: &[f64]) -> Result<Self> {
        let out = rows.len();
        let inp = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != inp) {
            return Err(Error::InvalidParameter("ragged weight rows".into()));
        }
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(
            DenseArray::new(vec![out, inp], data)?,
            DenseArray::new(vec![bias.len()], bias.to_vec())?,
        )
    }

    pub fn in_dim(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn weights(&self) -> &DenseArray {
        &self.weights
    }

    pub fn bias(&self) -> &DenseArray {
        &self.bias
    }

    fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    #[inline]
    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        let n_in = self.in_dim();
        let w = self.weights.data();
        out.clear();
        out.extend(self.bias.data().iter().enumerate().map(|(o, &b)| {
            let row = &w[o * n_in..(o + 1) * n_in];
            b + row.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>()
        }));
    }
}

/// Gradients of `<cotangent, net(x)>` with respect to parameters and input.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradient {
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpRecord", into = "MlpRecord")]
pub struct Mlp {
    widths: Vec<usize>,
    activation: Activation,
    layers: Vec<Layer>,
}

/// Serialized form: architecture descriptor plus flat weight list.
#[derive(Serialize, Deserialize)]
struct MlpRecord {
    layer_widths: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
}

impl TryFrom<MlpRecord> for Mlp {
    type Error = Error;

    fn try_from(rec: MlpRecord) -> Result<Self> {
        Mlp::from_params(&rec.layer_widths, rec.activation, &rec.params)
    }
}

impl From<Mlp> for MlpRecord {
    fn from(net: Mlp) -> Self {
        MlpRecord {
            params: net.params(),
            layer_widths: net.widths,
            activation: net.activation,
        }
    }
}

fn validate_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 2 || widths.contains(&0) {
        return Err(Error::InvalidParameter(format!(
            "layer widths {widths:?} need at least two positive entries"
        )));
    }
    Ok(())
}

impl Mlp {
    /// Glorot-uniform initialization of weights and biases, `a = sqrt(6/(fan_in+fan_out))`.
    pub fn random(widths: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        validate_widths(widths)?;
        let mut rng = rng_from_seed(seed);
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit).expect("finite limits");
                let weights: Vec<f64> = (0..fan_in * fan_out)
                    .map(|_| dist.sample(&mut rng))
                    .collect();
                let bias: Vec<f64> = (0..fan_out).map(|_| dist.sample(&mut rng)).collect();
                Layer::new(
                    DenseArray::new(vec![fan_out, fan_in], weights)?,
                    DenseArray::new(vec![fan_out], bias)?,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            widths: widths.to_vec(),
            activation,
            layers,
        })
    }

    pub fn from_layers(layers: Vec<Layer>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParameter(
                "an MLP needs at least one layer".into(),
            ));
        }
        let mut widths = vec![layers[0].in_dim()];
        for layer in &layers {
            check_len(
                "consecutive layer widths",
                *widths.last().unwrap(),
                layer.in_dim(),
            )?;
            widths.push(layer.out_dim());
        }
        validate_widths(&widths)?;
        Ok(Self {
            widths,
            activation,
            layers,
        })
    }

    pub fn from_params(widths: &[usize], activation: Activation, params: &[f64]) -> Result<Self> {
        validate_widths(widths)?;
        let mut net = Self {
            widths: widths.to_vec(),
            activation,
            layers: widths
                .windows(2)
                .map(|w| Layer {
                    weights: DenseArray::zeros(vec![w[1], w[0]]),
                    bias: DenseArray::zeros(vec![w[1]]),
                })
                .collect(),
        };
        net.set_params(params)?;
        Ok(net)
    }

    /// Same architecture with every parameter zero.
    pub fn zeros_like(&self) -> Self {
        Self::from_params(&self.widths, self.activation, &vec![0.0; self.num_params()])
            .expect("widths already validated")
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// True when the network computes an affine map of its input.
    pub fn is_affine(&self) -> bool {
        self.layers.len() == 1 || self.activation == Activation::Identity
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Layer::num_params).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            out.extend_from_slice(layer.weights.data());
            out.extend_from_slice(layer.bias.data());
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        check_len("mlp parameters", self.num_params(), params.len())?;
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("mlp parameters"));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            layer
                .weights
                .data_mut()
                .copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = layer.bias.len();
            layer
                .bias
                .data_mut()
                .copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_len("mlp input", self.input_dim(), input.len())?;
        let out = self.forward_unchecked(input);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mlp output"));
        }
        Ok(out)
    }

    pub(crate) fn forward_unchecked(&self, input: &[f64]) -> Vec<f64> {
        let mut h = input.to_vec();
        let mut z = Vec::with_capacity(self.widths.iter().copied().max().unwrap_or(0));
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            layer.affine(&h, &mut z);
            if l != last {
                for v in z.iter_mut() {
                    *v = self.activation.apply(*v);
                }
            }
            std::mem::swap(&mut h, &mut z);
        }
        h
    }

    /// Vector-Jacobian product: gradients of `<cotangent, net(input)>`.
    pub fn vjp(&self, input: &[f64], cotangent: &[f64]) -> Result<MlpGradient> {
        check_len("mlp input", self.input_dim(), input.len())?;
        check_len("mlp cotangent", self.output_dim(), cotangent.len())?;
        let mut params = vec![0.0; self.num_params()];
        let input_grad = self.vjp_accumulate(input, cotangent, Some(&mut params));
        Ok(MlpGradient {
            params,
            input: input_grad,
        })
    }

    /// Adds the parameter gradient into `param_acc` (when given) and returns
    /// the input gradient. Shapes are the caller's responsibility.
    pub(crate) fn vjp_accumulate(
        &self,
        input: &[f64],
        cotangent: &[f64],
        mut param_acc: Option<&mut [f64]>,
    ) -> Vec<f64> {
        // layer inputs and pre-activations
        let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut h = input.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::new();
            layer.affine(&h, &mut z);
            let next = if l != last {
                z.iter().map(|&v| self.activation.apply(v)).collect()
            } else {
                z.clone()
            };
            inputs.push(std::mem::replace(&mut h, next));
            pre.push(z);
        }

        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut acc = 0;
        for layer in &self.layers {
            offsets.push(acc);
            acc += layer.num_params();
        }

        let mut delta = cotangent.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let n_in = layer.in_dim();
            let x = &inputs[l];
            if let Some(grads) = param_acc.as_deref_mut() {
                let base = offsets[l];
                for (o, &dz) in delta.iter().enumerate() {
                    if dz == 0.0 {
                        continue;
                    }
                    let row = &mut grads[base + o * n_in..base + (o + 1) * n_in];
                    for (g, &xi) in row.iter_mut().zip(x) {
                        *g += dz * xi;
                    }
                }
                let bias_base = base + layer.weights.len();
                for (g, &dz) in grads[bias_base..bias_base + delta.len()]
                    .iter_mut()
                    .zip(&delta)
                {
                    *g += dz;
                }
            }
            let w = layer.weights.data();
            let mut prev = vec![0.0; n_in];
            for (o, &dz) in delta.iter().enumerate() {
                if dz == 0.0 {
                    continue;
                }
                for (p, &wi) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *p += wi * dz;
                }
            }
            if l > 0 {
                let z = &pre[l - 1];
                let a = &inputs[l];
                for ((p, &zi), &ai) in prev.iter_mut().zip(z).zip(a) {
                    *p *= self.activation.derivative(zi, ai);
                }
            }
            delta = prev;
        }
        delta
    }

    /// Per-output-coordinate gradients (one reverse pass per output).
    pub fn gradient(&self, input: &[f64]) -> Result<Vec<MlpGradient>> {
        let m = self.output_dim();
        (0..m)
            .map(|j| {
                let mut e = vec![0.0; m];
                e[j] = 1.0;
                self.vjp(input, &e)
            })
            .collect()
    }

    /// Jacobian with respect to the input, shape `output_dim x input_dim`.
    pub fn input_jacobian(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self.gradient(input)?.into_iter().map(|g| g.input).collect())
    }
}
