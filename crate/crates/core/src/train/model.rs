use serde::{Deserialize, Serialize};

use crate::chain::{Domain, KinematicChain};
use crate::error::{Error, Result};
use crate::nn::{GradientSet, MlpModel, OutputActivation, Parameters, Scalar};
use crate::rng::subseed;

/// Widths shared by both encoders and the decoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArch {
    pub hidden: Vec<usize>,
    pub latent_dim: usize,
}

impl Default for ModelArch {
    fn default() -> Self {
        ModelArch { hidden: vec![128; 6], latent_dim: 8 }
    }
}

impl ModelArch {
    pub fn dims(&self, input: usize, output: usize) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.hidden.len() + 2);
        d.push(input);
        d.extend(&self.hidden);
        d.push(output);
        d
    }
}

/// Two encoders into a shared latent space plus a decoder to robot angles.
#[derive(Debug, Clone)]
pub struct RetargetModel<T> {
    pub human_chain: KinematicChain,
    pub robot_chain: KinematicChain,
    pub encoder_h: MlpModel<T>,
    pub encoder_r: MlpModel<T>,
    pub decoder: MlpModel<T>,
}

/// Gradients for all three networks of a [`RetargetModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGradients<T> {
    pub encoder_h: GradientSet<T>,
    pub encoder_r: GradientSet<T>,
    pub decoder: GradientSet<T>,
}

impl<T: Scalar> ModelGradients<T> {
    pub fn zeros_like(model: &RetargetModel<T>) -> Self {
        ModelGradients {
            encoder_h: GradientSet::zeros_like(&model.encoder_h),
            encoder_r: GradientSet::zeros_like(&model.encoder_r),
            decoder: GradientSet::zeros_like(&model.decoder),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.encoder_h.flat();
        v.extend(self.encoder_r.flat());
        v.extend(self.decoder.flat());
        v
    }
}

/// Squash bounds for a robot chain's joints.
pub fn joint_limit_squash(chain: &KinematicChain) -> OutputActivation {
    let (lower, upper) = chain.ranges().into_iter().unzip();
    OutputActivation::LimitSquash { lower, upper }
}

impl<T: Scalar> RetargetModel<T> {
    pub fn new(human_chain: &KinematicChain, robot_chain: &KinematicChain, arch: &ModelArch, seed: u64) -> Result<Self> {
        human_chain.require_domain(Domain::Human)?;
        robot_chain.require_domain(Domain::Robot)?;
        let (jh, jr) = (human_chain.pose_width(), robot_chain.pose_width());
        let d = arch.latent_dim;
        Ok(RetargetModel {
            human_chain: human_chain.clone(),
            robot_chain: robot_chain.clone(),
            encoder_h: MlpModel::init(&arch.dims(jh, d), OutputActivation::Linear, subseed(seed, "encoder_h"))?,
            encoder_r: MlpModel::init(&arch.dims(jr, d), OutputActivation::Linear, subseed(seed, "encoder_r"))?,
            decoder: MlpModel::init(&arch.dims(d, jr), joint_limit_squash(robot_chain), subseed(seed, "decoder"))?,
        })
    }

    /// Assembles a model from existing networks, checking all widths.
    pub fn from_parts(
        human_chain: KinematicChain,
        robot_chain: KinematicChain,
        encoder_h: MlpModel<T>,
        encoder_r: MlpModel<T>,
        decoder: MlpModel<T>,
    ) -> Result<Self> {
        let d = encoder_h.output_dim();
        let checks = [
            (encoder_h.input_dim(), human_chain.pose_width(), "human encoder input"),
            (encoder_r.input_dim(), robot_chain.pose_width(), "robot encoder input"),
            (encoder_r.output_dim(), d, "robot encoder latent"),
            (decoder.input_dim(), d, "decoder latent"),
            (decoder.output_dim(), robot_chain.pose_width(), "decoder output"),
        ];
        for (found, expected, what) in checks {
            if found != expected {
                return Err(Error::ShapeMismatch(format!("{what} width {found}, expected {expected}")));
            }
        }
        Ok(RetargetModel { human_chain, robot_chain, encoder_h, encoder_r, decoder })
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder_h.output_dim()
    }

    pub fn arch(&self) -> ModelArch {
        let dims = self.encoder_h.layer_dims();
        ModelArch { hidden: dims[1..dims.len() - 1].to_vec(), latent_dim: self.latent_dim() }
    }

    pub fn cast<U: Scalar>(&self) -> RetargetModel<U> {
        RetargetModel {
            human_chain: self.human_chain.clone(),
            robot_chain: self.robot_chain.clone(),
            encoder_h: self.encoder_h.cast(),
            encoder_r: self.encoder_r.cast(),
            decoder: self.decoder.cast(),
        }
    }
}

impl<T: Scalar> Parameters for RetargetModel<T> {
    fn num_params(&self) -> usize {
        self.encoder_h.num_params() + self.encoder_r.num_params() + self.decoder.num_params()
    }

    fn flat_params(&self) -> Vec<f64> {
        let mut v = self.encoder_h.flat_params();
        v.extend(self.encoder_r.flat_params());
        v.extend(self.decoder.flat_params());
        v
    }

    fn set_flat_params(&mut self, values: &[f64]) {
        let a = self.encoder_h.num_params();
        let b = a + self.encoder_r.num_params();
        self.encoder_h.set_flat_params(&values[..a]);
        self.encoder_r.set_flat_params(&values[a..b]);
        self.decoder.set_flat_params(&values[b..]);
    }
}
