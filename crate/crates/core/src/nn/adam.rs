use ndarray::Zip;

use crate::error::{Error, Result};
use crate::nn::mlp::{GradientSet, MlpModel};
use crate::nn::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 0.001, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Moment estimates for one network.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    first: GradientSet<T>,
    second: GradientSet<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(model: &MlpModel<T>, config: AdamConfig) -> Self {
        AdamState { config, step: 0, first: GradientSet::zeros_like(model), second: GradientSet::zeros_like(model) }
    }
}

/// One bias-corrected Adam update. Non-finite gradients are rejected before
/// anything is modified.
pub fn adam_step<T: Scalar>(model: &mut MlpModel<T>, state: &mut AdamState<T>, grads: &GradientSet<T>) -> Result<()> {
    if grads.layers.len() != model.layers().len()
        || grads.layers.iter().zip(model.layers()).any(|(g, l)| g.weights.dim() != l.weights.dim() || g.bias.dim() != l.bias.dim())
    {
        return Err(Error::ShapeMismatch("gradient shapes do not match the model".into()));
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    state.step += 1;
    let c = state.config;
    let t = state.step as i32;
    let step_size = T::cast_from(c.lr / (1.0 - c.beta1.powi(t)));
    let v_corr = T::cast_from(1.0 / (1.0 - c.beta2.powi(t)));
    let (b1, b2, eps) = (T::cast_from(c.beta1), T::cast_from(c.beta2), T::cast_from(c.epsilon));
    let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
    let update = |p: &mut T, m: &mut T, v: &mut T, g: &T| {
        *m = b1 * *m + one_b1 * *g;
        *v = b2 * *v + one_b2 * *g * *g;
        *p -= step_size * *m / ((*v * v_corr).sqrt() + eps);
    };
    for (((layer, m), v), g) in model.layers_mut().iter_mut().zip(&mut state.first.layers).zip(&mut state.second.layers).zip(&grads.layers) {
        Zip::from(&mut layer.weights).and(&mut m.weights).and(&mut v.weights).and(&g.weights).for_each(update);
        Zip::from(&mut layer.bias).and(&mut m.bias).and(&mut v.bias).and(&g.bias).for_each(update);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::{Dense, OutputActivation};
    use crate::nn::params::Parameters;
    use ndarray::{array, Array1, Array2};

    fn scalar_model(w: f64) -> MlpModel<f64> {
        MlpModel::from_layers(vec![Dense { weights: array![[w]], bias: Array1::zeros(1) }], OutputActivation::Linear).unwrap()
    }

    fn grad(g: f64) -> GradientSet<f64> {
        GradientSet { layers: vec![Dense { weights: array![[g]], bias: Array1::zeros(1) }], input: None }
    }

    #[test]
    fn zero_gradients_leave_parameters() {
        let mut m = MlpModel::<f64>::init(&[3, 4, 2], OutputActivation::Linear, 1).unwrap();
        let before = m.flat_params();
        let mut s = AdamState::new(&m, AdamConfig::default());
        let zero = GradientSet::zeros_like(&m);
        for _ in 0..5 {
            adam_step(&mut m, &mut s, &zero).unwrap();
        }
        assert_eq!(m.flat_params(), before);
        assert_eq!(s.step, 5);
    }

    #[test]
    fn first_step_moves_by_lr() {
        for g in [3.0, -0.02, 150.0] {
            let mut m = scalar_model(0.5);
            let mut s = AdamState::new(&m, AdamConfig::default());
            adam_step(&mut m, &mut s, &grad(g)).unwrap();
            let delta = m.flat_params()[0] - 0.5;
            assert!((delta + 0.001 * f64::signum(g)).abs() < 0.001 * 1e-6, "g={g} delta={delta}");
        }
    }

    #[test]
    fn descends_convex_quadratic() {
        // f(w) = 0.5 * (w - 0.5)^2, started 1.5 away
        let mut m = scalar_model(-1.0);
        let mut s = AdamState::new(&m, AdamConfig { lr: 0.01, ..AdamConfig::default() });
        let mut g = 0.0;
        for _ in 0..1000 {
            let w = m.flat_params()[0];
            g = w - 0.5;
            adam_step(&mut m, &mut s, &grad(g)).unwrap();
        }
        let w = m.flat_params()[0];
        assert!((w - 0.5).abs() < 1e-3, "w={w} last grad={g}");
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut m = scalar_model(1.0);
        let mut s = AdamState::new(&m, AdamConfig::default());
        assert!(adam_step(&mut m, &mut s, &grad(f64::NAN)).is_err());
        assert_eq!(s.step, 0);
        assert_eq!(m.flat_params()[0], 1.0);
        let bad = GradientSet { layers: vec![Dense { weights: Array2::zeros((2, 1)), bias: Array1::zeros(1) }], input: None };
        assert!(adam_step(&mut m, &mut s, &bad).is_err());
    }
}
