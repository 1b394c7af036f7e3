//! Inference: human pose to latent code to robot joint angles.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::MotionTrace;
use crate::error::{Error, Result};
use crate::nn::{MlpModel, Scalar};
use crate::pose::{HumanPose, RobotPose};
use crate::train::RetargetModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentCode {
    pub values: Vec<f64>,
}

impl LatentCode {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("latent component {i} is {}", values[i])));
        }
        Ok(LatentCode { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn distance(&self, other: &LatentCode) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    /// `self + t * (other - self)`.
    pub fn lerp(&self, other: &LatentCode, t: f64) -> LatentCode {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + t * (b - a)).collect();
        LatentCode { values }
    }
}

fn run_row<T: Scalar>(net: &MlpModel<T>, row: &[f64]) -> Result<Vec<f64>> {
    let input = Array2::from_shape_fn((1, row.len()), |(_, j)| T::cast_from(row[j]));
    let out = net.predict(input.view())?;
    Ok(out.iter().map(|v| v.as_f64()).collect())
}

impl<T: Scalar> RetargetModel<T> {
    pub fn encode_human(&self, pose: &HumanPose) -> Result<LatentCode> {
        if pose.len() != self.human_chain.len() {
            return Err(Error::ChainMismatch(format!(
                "human pose has {} joints, chain '{}' has {}",
                pose.len(),
                self.human_chain.name(),
                self.human_chain.len()
            )));
        }
        LatentCode::new(run_row(&self.encoder_h, &pose.to_flat())?)
    }

    pub fn encode_robot(&self, pose: &RobotPose) -> Result<LatentCode> {
        if pose.len() != self.robot_chain.len() {
            return Err(Error::ChainMismatch(format!(
                "robot pose has {} joints, chain '{}' has {}",
                pose.len(),
                self.robot_chain.name(),
                self.robot_chain.len()
            )));
        }
        if let Some(i) = pose.joint_angles().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("joint {i} angle is not finite")));
        }
        LatentCode::new(run_row(&self.encoder_r, pose.joint_angles())?)
    }

    pub fn decode_to_robot(&self, z: &LatentCode) -> Result<RobotPose> {
        if z.len() != self.latent_dim() {
            return Err(Error::ShapeMismatch(format!("latent has {} values, expected {}", z.len(), self.latent_dim())));
        }
        let z = LatentCode::new(z.values.clone())?;
        let angles = run_row(&self.decoder, &z.values)?;
        RobotPose::new_strict(&self.robot_chain, angles)
    }

    pub fn retarget(&self, pose: &HumanPose) -> Result<RobotPose> {
        self.decode_to_robot(&self.encode_human(pose)?)
    }

    /// Batched retarget. Results can differ from [`Self::retarget`] in the
    /// last bits since the matrix products are blocked differently.
    pub fn retarget_batch(&self, poses: &[HumanPose]) -> Result<Vec<RobotPose>> {
        if poses.is_empty() {
            return Ok(Vec::new());
        }
        let width = self.human_chain.pose_width();
        let mut data = Vec::with_capacity(poses.len() * width);
        for p in poses {
            if p.len() != self.human_chain.len() {
                return Err(Error::ChainMismatch(format!("human pose has {} joints", p.len())));
            }
            data.extend(p.to_flat().into_iter().map(T::cast_from));
        }
        let x = Array2::from_shape_vec((poses.len(), width), data).expect("uniform width");
        let z = self.encoder_h.predict(x.view())?;
        let y = self.decoder.predict(z.view())?;
        y.rows()
            .into_iter()
            .map(|r| RobotPose::new_strict(&self.robot_chain, r.iter().map(|v| v.as_f64()).collect()))
            .collect()
    }

    /// Decodes uniformly spaced latent interpolations between consecutive
    /// keyposes. Segment boundaries are emitted once.
    pub fn interpolate_keyposes(&self, keyposes: &[HumanPose], steps_per_segment: usize, frame_rate: f64) -> Result<MotionTrace> {
        if keyposes.len() < 2 {
            return Err(Error::Validation(format!("need at least 2 keyposes, got {}", keyposes.len())));
        }
        if steps_per_segment < 2 {
            return Err(Error::Validation(format!("steps_per_segment must be at least 2, got {steps_per_segment}")));
        }
        let codes = keyposes.iter().map(|k| self.encode_human(k)).collect::<Result<Vec<_>>>()?;
        let mut frames = Vec::new();
        for (s, pair) in codes.windows(2).enumerate() {
            let first = if s == 0 { 0 } else { 1 };
            for i in first..steps_per_segment {
                // Endpoints decode the stored codes so they match `retarget` bit for bit.
                let z = if i == 0 {
                    pair[0].clone()
                } else if i == steps_per_segment - 1 {
                    pair[1].clone()
                } else {
                    pair[0].lerp(&pair[1], i as f64 / (steps_per_segment - 1) as f64)
                };
                frames.push(self.decode_to_robot(&z)?);
            }
        }
        MotionTrace::from_robot(&self.robot_chain, frame_rate, &frames)
    }

    pub fn retarget_trace(&self, trace: &MotionTrace) -> Result<MotionTrace> {
        if trace.chain_name != self.human_chain.name() {
            return Err(Error::ChainMismatch(format!(
                "trace is for chain '{}', model expects '{}'",
                trace.chain_name,
                self.human_chain.name()
            )));
        }
        trace.validate(&self.human_chain)?;
        let mut out = Vec::with_capacity(trace.len());
        for i in 0..trace.len() {
            let pose = trace.human_frame(&self.human_chain, i)?;
            let r = self.retarget(&pose).map_err(|e| Error::Validation(format!("frame {i}: {e}")))?;
            out.push(r);
        }
        MotionTrace::from_robot(&self.robot_chain, trace.frame_rate, &out)
    }
}

/// Largest absolute per-joint change between consecutive frames.
pub fn max_frame_step(trace: &MotionTrace) -> f64 {
    trace
        .frames
        .windows(2)
        .flat_map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}
