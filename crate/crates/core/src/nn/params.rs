use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// One dense layer: `y = W x + b`, `W` stored `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            weight: Array2::zeros((out_dim, in_dim)),
            bias: Array1::zeros(out_dim),
        }
    }

    /// Uniform `+-1/sqrt(in)` initialization for weights and biases.
    pub fn uniform(out_dim: usize, in_dim: usize, rng: &mut RngStream) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let weight =
            Array2::from_shape_simple_fn((out_dim, in_dim), || rng.uniform_range(-bound, bound));
        let bias = Array1::from_shape_simple_fn(out_dim, || rng.uniform_range(-bound, bound));
        Self { weight, bias }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }
}

/// Ordered layer parameters of one network; the unit of federated exchange.
///
/// The flat form lists, layer by layer, the row-major weights followed by
/// the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub layers: Vec<Layer>,
}

impl ParamVector {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.out_dim(), l.in_dim()))
                .collect(),
        }
    }

    /// `(out, in)` per layer.
    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers
            .iter()
            .map(|l| (l.out_dim(), l.in_dim()))
            .collect()
    }

    /// Number of scalar parameters.
    pub fn len(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn same_shape(&self, other: &ParamVector) -> bool {
        self.shapes() == other.shapes()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for s in self.slices() {
            out.extend_from_slice(s);
        }
        out
    }

    /// Rebuilds a vector with this one's shapes from flat values.
    pub fn unflatten(&self, flat: &[f64]) -> Result<ParamVector> {
        if flat.len() != self.len() {
            return Err(Error::Shape(format!(
                "flat length {} does not match parameter count {}",
                flat.len(),
                self.len()
            )));
        }
        let mut out = self.clone();
        let mut offset = 0;
        for s in out.slices_mut() {
            s.copy_from_slice(&flat[offset..offset + s.len()]);
            offset += s.len();
        }
        Ok(out)
    }

    /// Contiguous parameter slices in flat order.
    pub fn slices(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().flat_map(|l| {
            [
                l.weight.as_slice().expect("standard layout"),
                l.bias.as_slice().expect("standard layout"),
            ]
        })
    }

    pub fn slices_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers.iter_mut().flat_map(|l| {
            [
                l.weight.as_slice_mut().expect("standard layout"),
                l.bias.as_slice_mut().expect("standard layout"),
            ]
        })
    }

    fn zip_apply(&mut self, other: &ParamVector, mut f: impl FnMut(&mut f64, f64)) {
        assert!(self.same_shape(other), "parameter shapes differ");
        for (dst, src) in self.slices_mut().zip(other.slices()) {
            for (d, s) in dst.iter_mut().zip(src) {
                f(d, *s);
            }
        }
    }

    /// `self <- tau * source + (1 - tau) * self`.
    pub fn soft_update(&mut self, source: &ParamVector, tau: f64) {
        self.zip_apply(source, |t, s| *t = tau * s + (1.0 - tau) * *t);
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, other: &ParamVector, alpha: f64) {
        self.zip_apply(other, |d, s| *d += alpha * s);
    }

    pub fn scale(&mut self, alpha: f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|v| *v *= alpha);
        }
    }

    /// `sum_k w_k * params_k`. All parts must share one shape.
    pub fn weighted_sum(parts: &[(&ParamVector, f64)]) -> Result<ParamVector> {
        let (first, _) = parts
            .first()
            .ok_or_else(|| Error::Shape("weighted sum of no parameter vectors".into()))?;
        if parts.iter().any(|(p, _)| !p.same_shape(first)) {
            return Err(Error::Shape(
                "weighted sum over differently shaped networks".into(),
            ));
        }
        let mut out = first.zeros_like();
        for (p, w) in parts {
            out.add_scaled(p, *w);
        }
        Ok(out)
    }

    /// Element-wise unweighted mean.
    pub fn mean(models: &[&ParamVector]) -> Result<ParamVector> {
        let w = 1.0 / models.len().max(1) as f64;
        let parts: Vec<(&ParamVector, f64)> = models.iter().map(|m| (*m, w)).collect();
        Self::weighted_sum(&parts)
    }

    pub fn max_abs_diff(&self, other: &ParamVector) -> f64 {
        assert!(self.same_shape(other), "parameter shapes differ");
        self.slices()
            .zip(other.slices())
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    pub fn l2_norm(&self) -> f64 {
        self.slices()
            .flat_map(|s| s.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.slices().all(|s| s.iter().all(|v| v.is_finite()))
    }
}
