/// Flat access to every trainable value of a model, in a fixed order that
/// matches the corresponding flattened gradients.
pub trait Parameters {
    fn num_params(&self) -> usize;
    fn flat_params(&self) -> Vec<f64>;
    fn set_flat_params(&mut self, values: &[f64]);
}
