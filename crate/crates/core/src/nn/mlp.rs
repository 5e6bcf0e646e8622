use ndarray::{Array2, ArrayView2, Axis};

use super::params::{Layer, ParamVector};
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative given the pre-activation `pre` and the output `post`.
    pub fn derivative(self, pre: f64, post: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - post * post,
            Activation::Identity => 1.0,
        }
    }
}

/// Fully connected network: affine + activation on hidden layers, linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub params: ParamVector,
    pub hidden: Activation,
}

/// Activations saved by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Input to every layer; `inputs[0]` is the network input.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of every hidden layer.
    pre: Vec<Array2<f64>>,
}

impl MlpCache {
    pub fn batch(&self) -> usize {
        self.inputs[0].nrows()
    }
}

impl Mlp {
    /// Randomly initialized network with layer widths `dims` (input first).
    pub fn new(dims: &[usize], hidden: Activation, rng: &mut RngStream) -> Self {
        assert!(dims.len() >= 2, "an MLP needs an input and an output width");
        let layers = dims
            .windows(2)
            .map(|w| Layer::uniform(w[1], w[0], rng))
            .collect();
        Self {
            params: ParamVector::new(layers),
            hidden,
        }
    }

    pub fn from_params(params: ParamVector, hidden: Activation) -> Self {
        Self { params, hidden }
    }

    pub fn input_dim(&self) -> usize {
        self.params.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.params.layers.last().map(|l| l.out_dim()).unwrap_or(0)
    }

    /// Batched forward pass; rows of `input` are samples.
    pub fn forward(&self, input: ArrayView2<f64>) -> Result<(Array2<f64>, MlpCache)> {
        if input.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                input.ncols()
            )));
        }
        let n = self.params.layers.len();
        let mut inputs = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n - 1);
        let mut x = input.to_owned();
        for (i, layer) in self.params.layers.iter().enumerate() {
            let mut z = x.dot(&layer.weight.t());
            z += &layer.bias;
            inputs.push(x);
            if i + 1 < n {
                let act = self.hidden;
                let a = z.mapv(|v| act.apply(v));
                pre.push(z);
                x = a;
            } else {
                x = z;
            }
        }
        Ok((x, MlpCache { inputs, pre }))
    }

    /// Forward pass without keeping the cache.
    pub fn predict(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        if input.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "network expects {} inputs, got {}",
                self.input_dim(),
                input.ncols()
            )));
        }
        let n = self.params.layers.len();
        let mut x = input.to_owned();
        for (i, layer) in self.params.layers.iter().enumerate() {
            let mut z = x.dot(&layer.weight.t());
            z += &layer.bias;
            if i + 1 < n {
                let act = self.hidden;
                z.mapv_inplace(|v| act.apply(v));
            }
            x = z;
        }
        Ok(x)
    }

    pub fn predict_one(&self, input: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Ok(self.predict(view)?.into_raw_vec_and_offset().0)
    }

    /// Mean squared error of a single-output network against `targets`, and
    /// its parameter gradient.
    pub fn mse_loss_grad(
        &self,
        input: ArrayView2<f64>,
        targets: &[f64],
    ) -> Result<(f64, ParamVector)> {
        let (q, cache) = self.forward(input)?;
        if q.ncols() != 1 || q.nrows() != targets.len() {
            return Err(Error::Shape(
                "one target per row of a single-output network".into(),
            ));
        }
        let n = targets.len() as f64;
        let mut g = Array2::zeros((targets.len(), 1));
        let mut loss = 0.0;
        for (i, y) in targets.iter().enumerate() {
            let r = q[[i, 0]] - y;
            loss += r * r;
            g[[i, 0]] = 2.0 * r / n;
        }
        let (grad, _) = self.backward(&cache, g.view())?;
        Ok((loss / n, grad))
    }

    /// Reverse-mode gradients of a scalar loss given `dL/doutput`.
    ///
    /// Returns the parameter gradient (shaped like `params`) and `dL/dinput`.
    pub fn backward(
        &self,
        cache: &MlpCache,
        grad_output: ArrayView2<f64>,
    ) -> Result<(ParamVector, Array2<f64>)> {
        let n = self.params.layers.len();
        if cache.inputs.len() != n || cache.pre.len() + 1 != n {
            return Err(Error::Shape(
                "cache was produced by a different network".into(),
            ));
        }
        if grad_output.ncols() != self.output_dim() || grad_output.nrows() != cache.batch() {
            return Err(Error::Shape(format!(
                "output gradient is {}x{}, expected {}x{}",
                grad_output.nrows(),
                grad_output.ncols(),
                cache.batch(),
                self.output_dim()
            )));
        }
        for (layer, x) in self.params.layers.iter().zip(&cache.inputs) {
            if x.ncols() != layer.in_dim() {
                return Err(Error::Shape(
                    "cache was produced by a different network".into(),
                ));
            }
        }
        let mut grads = self.params.zeros_like();
        let mut delta = grad_output.to_owned();
        for i in (0..n).rev() {
            let layer = &self.params.layers[i];
            let x = &cache.inputs[i];
            grads.layers[i].weight = delta.t().dot(x);
            grads.layers[i].bias = delta.sum_axis(Axis(0));
            let dx = delta.dot(&layer.weight);
            if i == 0 {
                return Ok((grads, dx));
            }
            let act = self.hidden;
            let mut d = dx;
            ndarray::Zip::from(&mut d)
                .and(&cache.pre[i - 1])
                .and(&cache.inputs[i])
                .for_each(|g, &pre, &post| *g *= act.derivative(pre, post));
            delta = d;
        }
        unreachable!("loop returns at the first layer")
    }
}
