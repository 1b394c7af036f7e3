//! Fixed-topology dense networks: tanh hidden layers, linear or
//! limit-squashed outputs, batch-major tensors (`batch x features`).

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::nn::params::Parameters;
use crate::nn::scalar::Scalar;
use crate::rng::derive_rng;

/// Fraction of each joint half-range kept free by the limit squash, so
/// decoded angles stay strictly inside their limits even in `f32`.
pub const SQUASH_MARGIN: f64 = 1e-5;

static NEXT_MODEL_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutputActivation {
    Linear,
    /// `center + halfwidth * (1 - SQUASH_MARGIN) * tanh(a)` per output.
    LimitSquash { lower: Vec<f64>, upper: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    /// `fan_in x fan_out`
    pub weights: Array2<T>,
    pub bias: Array1<T>,
}

#[derive(Debug, Clone)]
pub struct MlpModel<T> {
    layers: Vec<Dense<T>>,
    output: OutputActivation,
    // squash constants, one per output
    center: Array1<T>,
    half: Array1<T>,
    id: u64,
    version: u64,
}

impl<T: Scalar> PartialEq for MlpModel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers && self.output == other.output
    }
}

/// Activations recorded by [`MlpModel::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    /// Input of every layer (the first is the network input).
    inputs: Vec<Array2<T>>,
    /// `tanh` of the output pre-activation (squash outputs only).
    out_tanh: Option<Array2<T>>,
    model_id: u64,
    model_version: u64,
}

impl<T> ForwardCache<T> {
    pub fn batch_size(&self) -> usize {
        self.inputs[0].nrows()
    }
}

/// Gradients mirroring an [`MlpModel`]'s parameter shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<T> {
    pub layers: Vec<Dense<T>>,
    /// Gradient with respect to the network input, when requested.
    pub input: Option<Array2<T>>,
}

impl<T: Scalar> GradientSet<T> {
    pub fn zeros_like(model: &MlpModel<T>) -> Self {
        GradientSet {
            layers: model
                .layers
                .iter()
                .map(|l| Dense { weights: Array2::zeros(l.weights.raw_dim()), bias: Array1::zeros(l.bias.raw_dim()) })
                .collect(),
            input: None,
        }
    }

    /// Adds parameter gradients of `other` (input gradients are ignored).
    pub fn accumulate(&mut self, other: &GradientSet<T>) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights += &b.weights;
            a.bias += &b.bias;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.weights.iter().map(|v| v.as_f64()));
            out.extend(l.bias.iter().map(|v| v.as_f64()));
        }
        out
    }
}

impl<T: Scalar> MlpModel<T> {
    /// Glorot-uniform weights, zero biases.
    pub fn init(layer_dims: &[usize], output: OutputActivation, seed: u64) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(Error::Validation(format!("need at least input and output dims, got {layer_dims:?}")));
        }
        if layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::Validation(format!("layer dims must be >= 1, got {layer_dims:?}")));
        }
        let mut rng = derive_rng(seed, 0);
        let layers = layer_dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights = Array2::from_shape_simple_fn((fan_in, fan_out), || T::cast_from(rng.gen_range(-bound..bound)));
                Dense { weights, bias: Array1::zeros(fan_out) }
            })
            .collect();
        Self::from_layers(layers, output)
    }

    /// Wraps explicit parameters, checking that shapes chain together.
    pub fn from_layers(layers: Vec<Dense<T>>, output: OutputActivation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Validation("network has no layers".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weights.ncols() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i}: bias length {} vs {} outputs",
                    l.bias.len(),
                    l.weights.ncols()
                )));
            }
            if i > 0 && layers[i - 1].weights.ncols() != l.weights.nrows() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i} takes {} inputs but layer {} emits {}",
                    l.weights.nrows(),
                    i - 1,
                    layers[i - 1].weights.ncols()
                )));
            }
            if !l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("layer {i} parameters")));
            }
        }
        let out_dim = layers.last().unwrap().weights.ncols();
        let (center, half) = match &output {
            OutputActivation::Linear => (Array1::zeros(out_dim), Array1::ones(out_dim)),
            OutputActivation::LimitSquash { lower, upper } => {
                if lower.len() != out_dim || upper.len() != out_dim {
                    return Err(Error::ShapeMismatch(format!(
                        "squash limits have {}/{} entries for {out_dim} outputs",
                        lower.len(),
                        upper.len()
                    )));
                }
                if lower.iter().zip(upper).any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
                    return Err(Error::Validation("squash limits must be finite with lower <= upper".into()));
                }
                let center = lower.iter().zip(upper).map(|(lo, hi)| T::cast_from(0.5 * (lo + hi))).collect();
                let half = lower.iter().zip(upper).map(|(lo, hi)| T::cast_from(0.5 * (hi - lo) * (1.0 - SQUASH_MARGIN))).collect();
                (center, half)
            }
        };
        Ok(MlpModel { layers, output, center, half, id: NEXT_MODEL_ID.fetch_add(1, Ordering::Relaxed), version: 0 })
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    /// Mutable access to parameters; invalidates outstanding forward caches.
    pub fn layers_mut(&mut self) -> &mut [Dense<T>] {
        self.version += 1;
        &mut self.layers
    }

    pub fn output_activation(&self) -> &OutputActivation {
        &self.output
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].weights.nrows()];
        dims.extend(self.layers.iter().map(|l| l.weights.ncols()));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weights.ncols()
    }

    /// Converts the element type (e.g. an `f64` copy of an `f32` model).
    pub fn cast<U: Scalar>(&self) -> MlpModel<U> {
        let layers = self
            .layers
            .iter()
            .map(|l| Dense { weights: l.weights.mapv(|v| U::cast_from(v.as_f64())), bias: l.bias.mapv(|v| U::cast_from(v.as_f64())) })
            .collect();
        MlpModel::from_layers(layers, self.output.clone()).expect("cast preserves shapes")
    }

    fn check_input(&self, input: &ArrayView2<T>) -> Result<()> {
        if input.ncols() != self.input_dim() {
            return Err(Error::ShapeMismatch(format!(
                "network expects {} input features, got {}",
                self.input_dim(),
                input.ncols()
            )));
        }
        if !input.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("network input".into()));
        }
        Ok(())
    }

    /// Forward pass that also records what the backward pass needs.
    pub fn forward(&self, input: ArrayView2<T>) -> Result<(Array2<T>, ForwardCache<T>)> {
        self.check_input(&input)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut x = input.to_owned();
        let last = self.layers.len() - 1;
        let mut out_tanh = None;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = x.dot(&layer.weights);
            z += &layer.bias;
            inputs.push(x);
            if i < last {
                z.mapv_inplace(T::activation);
                x = z;
            } else {
                x = match self.output {
                    OutputActivation::Linear => z,
                    OutputActivation::LimitSquash { .. } => {
                        z.mapv_inplace(T::activation);
                        let y = &z * &self.half + &self.center;
                        out_tanh = Some(z);
                        y
                    }
                };
            }
        }
        Ok((x, ForwardCache { inputs, out_tanh, model_id: self.id, model_version: self.version }))
    }

    /// Forward pass without keeping intermediates.
    pub fn predict(&self, input: ArrayView2<T>) -> Result<Array2<T>> {
        self.check_input(&input)?;
        Ok(self.predict_unchecked(input))
    }

    pub(crate) fn predict_unchecked(&self, input: ArrayView2<T>) -> Array2<T> {
        let last = self.layers.len() - 1;
        let mut x = input.dot(&self.layers[0].weights);
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                x = x.dot(&layer.weights);
            }
            x += &layer.bias;
            if i < last {
                x.mapv_inplace(T::activation);
            } else if let OutputActivation::LimitSquash { .. } = self.output {
                x.mapv_inplace(T::activation);
                x = &x * &self.half + &self.center;
            }
        }
        x
    }

    /// Reverse-mode gradients of a scalar loss given `upstream = dL/d(output)`.
    pub fn backward(&self, cache: &ForwardCache<T>, upstream: ArrayView2<T>, want_input_grad: bool) -> Result<GradientSet<T>> {
        if cache.model_id != self.id || cache.model_version != self.version {
            return Err(Error::Validation("forward cache is stale (model changed since the forward pass)".into()));
        }
        if cache.inputs.len() != self.layers.len() || upstream.dim() != (cache.batch_size(), self.output_dim()) {
            return Err(Error::ShapeMismatch(format!(
                "upstream gradient {:?} does not match cached batch {} x {}",
                upstream.dim(),
                cache.batch_size(),
                self.output_dim()
            )));
        }
        let mut delta = upstream.to_owned();
        if let Some(t) = &cache.out_tanh {
            // d/da [c + h tanh(a)] = h (1 - tanh^2)
            Zip::from(&mut delta).and(t).for_each(|d, &t| *d *= T::one() - t * t);
            delta *= &self.half;
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut input = None;
        for i in (0..self.layers.len()).rev() {
            let x = &cache.inputs[i];
            let dw = x.t().dot(&delta);
            let db = delta.sum_axis(Axis(0));
            layers.push(Dense { weights: dw, bias: db });
            if i > 0 || want_input_grad {
                let mut dx = delta.dot(&self.layers[i].weights.t());
                if i > 0 {
                    // x is the tanh output of the previous layer
                    Zip::from(&mut dx).and(x).for_each(|d, &a| *d *= T::one() - a * a);
                    delta = dx;
                } else {
                    input = Some(dx);
                }
            }
        }
        layers.reverse();
        Ok(GradientSet { layers, input })
    }
}

impl<T: Scalar> Parameters for MlpModel<T> {
    fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weights.iter().map(|v| v.as_f64()));
            out.extend(l.bias.iter().map(|v| v.as_f64()));
        }
        out
    }

    fn set_flat_params(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.num_params(), "flat parameter length");
        let mut it = values.iter();
        for l in self.layers_mut() {
            for w in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *w = T::cast_from(*it.next().unwrap());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn init_is_deterministic_with_zero_bias() {
        let a = MlpModel::<f64>::init(&[2, 2], OutputActivation::Linear, 9).unwrap();
        let b = MlpModel::<f64>::init(&[2, 2], OutputActivation::Linear, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.layers()[0].bias.iter().all(|v| *v == 0.0));
        assert!(MlpModel::<f64>::init(&[], OutputActivation::Linear, 0).is_err());
        assert!(MlpModel::<f64>::init(&[3, 0, 2], OutputActivation::Linear, 0).is_err());
    }

    #[test]
    fn default_encoder_parameter_count() {
        let mut dims = vec![56];
        dims.extend([128; 6]);
        dims.push(8);
        let m = MlpModel::<f32>::init(&dims, OutputActivation::Linear, 1).unwrap();
        let expected: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        assert_eq!(m.num_params(), expected);
        assert_eq!(expected, 56 * 128 + 128 + 5 * (128 * 128 + 128) + 128 * 8 + 8);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut m = MlpModel::<f64>::init(&[3, 4, 2], OutputActivation::Linear, 1).unwrap();
        let zeros = vec![0.0; m.num_params()];
        m.set_flat_params(&zeros);
        let y = m.predict(array![[1.0, -2.0, 3.0]].view()).unwrap();
        assert!(y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn identity_single_layer() {
        let layer = Dense { weights: Array2::<f64>::eye(3), bias: Array1::zeros(3) };
        let m = MlpModel::from_layers(vec![layer], OutputActivation::Linear).unwrap();
        let x = array![[0.5, -1.5, 2.0], [1.0, 2.0, 3.0]];
        assert_eq!(m.predict(x.view()).unwrap(), x);
    }

    #[test]
    fn squash_asymptotes() {
        let out = OutputActivation::LimitSquash { lower: vec![-1.0], upper: vec![1.0] };
        let layer = Dense { weights: array![[1.0f64]], bias: array![0.0] };
        let m = MlpModel::from_layers(vec![layer], out).unwrap();
        let y = m.predict(array![[0.0], [1e6], [-1e6]].view()).unwrap();
        assert_eq!(y[[0, 0]], 0.0);
        assert!(y[[1, 0]] < 1.0 && y[[1, 0]] > 1.0 - 1e-4);
        assert!(y[[2, 0]] > -1.0 && y[[2, 0]] < -1.0 + 1e-4);
    }

    #[test]
    fn width_mismatch_and_non_finite_rejected() {
        let m = MlpModel::<f64>::init(&[3, 2], OutputActivation::Linear, 1).unwrap();
        assert!(m.forward(array![[1.0, 2.0]].view()).is_err());
        assert!(m.forward(array![[1.0, f64::NAN, 0.0]].view()).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let m = MlpModel::<f64>::init(&[3, 5, 2], OutputActivation::Linear, 4).unwrap();
        let (y, cache) = m.forward(array![[0.1, 0.2, 0.3]].view()).unwrap();
        let g = m.backward(&cache, Array2::zeros(y.raw_dim()).view(), true).unwrap();
        assert!(g.flat().iter().all(|v| *v == 0.0));
        assert!(g.input.unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_layer_weight_gradient_is_input_outer_ones() {
        let m = MlpModel::<f64>::init(&[3, 2], OutputActivation::Linear, 4).unwrap();
        let x = array![[0.5, -1.0, 2.0]];
        let (y, cache) = m.forward(x.view()).unwrap();
        let g = m.backward(&cache, Array2::ones(y.raw_dim()).view(), false).unwrap();
        let expected = x.t().dot(&array![[1.0, 1.0]]);
        assert_eq!(g.layers[0].weights, expected);
        assert_eq!(g.layers[0].bias, array![1.0, 1.0]);
    }

    #[test]
    fn stale_cache_rejected() {
        let mut m = MlpModel::<f64>::init(&[2, 2], OutputActivation::Linear, 4).unwrap();
        let (y, cache) = m.forward(array![[1.0, 1.0]].view()).unwrap();
        let p = m.flat_params();
        m.set_flat_params(&p);
        assert!(m.backward(&cache, y.view(), false).is_err());
        let other = MlpModel::<f64>::init(&[2, 2], OutputActivation::Linear, 4).unwrap();
        assert!(other.backward(&cache, y.view(), false).is_err());
    }

    #[test]
    fn forward_is_bitwise_deterministic() {
        let m = MlpModel::<f32>::init(&[4, 16, 16, 3], OutputActivation::Linear, 2).unwrap();
        let x = Array2::from_shape_fn((5, 4), |(i, j)| (i as f32 - j as f32) * 0.3);
        assert_eq!(m.predict(x.view()).unwrap(), m.predict(x.view()).unwrap());
        assert_eq!(m.predict(x.view()).unwrap(), m.forward(x.view()).unwrap().0);
    }
}
