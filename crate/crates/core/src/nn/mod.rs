//! Dense-network machinery: initialization, forward and reverse passes,
//! Adam, and finite-difference gradient checks.

pub mod adam;
pub mod gradcheck;
pub mod mlp;
pub mod params;
pub mod scalar;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{finite_diff_check, GradCheckReport};
pub use mlp::{Dense, ForwardCache, GradientSet, MlpModel, OutputActivation};
pub use params::Parameters;
pub use scalar::Scalar;
