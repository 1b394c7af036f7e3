//! Validated pose types for both domains.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::chain::{Domain, KinematicChain, SemanticLinks};
use crate::error::{Error, Result};
use crate::quat::{Quat, UNIT_TOLERANCE};

/// Slack allowed when checking stored robot angles against their limits
/// (covers the 32-bit storage round trip).
pub const LIMIT_TOLERANCE: f64 = 1e-6;

/// Per-joint parent-relative rotations of a human skeleton.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanPose {
    local_rotations: Vec<Quat>,
}

impl HumanPose {
    /// Validates unit norms and length; each quaternion is renormalized and
    /// canonicalized.
    pub fn new(chain: &KinematicChain, local_rotations: Vec<Quat>) -> Result<Self> {
        chain.require_domain(Domain::Human)?;
        if local_rotations.len() != chain.len() {
            return Err(Error::ChainMismatch(format!(
                "human pose has {} joints, chain '{}' has {}",
                local_rotations.len(),
                chain.name(),
                chain.len()
            )));
        }
        let mut out = Vec::with_capacity(local_rotations.len());
        for (j, q) in local_rotations.into_iter().enumerate() {
            if !q.is_finite() {
                return Err(Error::NonFinite(format!("human joint {j} rotation {q:?}")));
            }
            let n = q.norm();
            if (n - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::Validation(format!("human joint {j} quaternion norm {n} is not 1")));
            }
            out.push(q.normalized().canonicalize());
        }
        Ok(HumanPose { local_rotations: out })
    }

    /// All joints at rest (identity local rotation).
    pub fn rest(chain: &KinematicChain) -> Result<Self> {
        Self::new(chain, vec![Quat::IDENTITY; chain.len()])
    }

    /// Parses `4 * J` values laid out `w, x, y, z` per joint.
    pub fn from_flat(chain: &KinematicChain, values: &[f64]) -> Result<Self> {
        if values.len() != 4 * chain.len() {
            return Err(Error::ChainMismatch(format!(
                "flat human pose has {} values, chain '{}' needs {}",
                values.len(),
                chain.name(),
                4 * chain.len()
            )));
        }
        let quats = values.chunks_exact(4).map(|c| Quat::from_raw(c[0], c[1], c[2], c[3])).collect();
        Self::new(chain, quats)
    }

    pub fn local_rotations(&self) -> &[Quat] {
        &self.local_rotations
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.local_rotations.iter().flat_map(|q| q.as_array()).collect()
    }

    pub fn len(&self) -> usize {
        self.local_rotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.local_rotations.is_empty()
    }
}

/// Joint angles of a robot arm, always within the chain's limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotPose {
    joint_angles: Vec<f64>,
}

impl RobotPose {
    /// Clamps each angle into its joint limits.
    pub fn new(chain: &KinematicChain, joint_angles: Vec<f64>) -> Result<Self> {
        Self::check_shape(chain, &joint_angles)?;
        let angles = joint_angles
            .into_iter()
            .zip(chain.joints())
            .map(|(a, j)| {
                let (lo, hi) = j.range();
                a.clamp(lo, hi)
            })
            .collect();
        Ok(RobotPose { joint_angles: angles })
    }

    /// Like [`RobotPose::new`] but rejects angles outside the limits
    /// (beyond [`LIMIT_TOLERANCE`]) instead of clamping them.
    pub fn new_strict(chain: &KinematicChain, joint_angles: Vec<f64>) -> Result<Self> {
        Self::check_shape(chain, &joint_angles)?;
        for (i, (a, j)) in joint_angles.iter().zip(chain.joints()).enumerate() {
            let (lo, hi) = j.range();
            if *a < lo - LIMIT_TOLERANCE || *a > hi + LIMIT_TOLERANCE {
                return Err(Error::Validation(format!(
                    "robot joint {i} ('{}') angle {a} outside limits [{lo}, {hi}]",
                    j.name
                )));
            }
        }
        Self::new(chain, joint_angles)
    }

    fn check_shape(chain: &KinematicChain, joint_angles: &[f64]) -> Result<()> {
        chain.require_domain(Domain::Robot)?;
        if joint_angles.len() != chain.len() {
            return Err(Error::ChainMismatch(format!(
                "robot pose has {} joints, chain '{}' has {}",
                joint_angles.len(),
                chain.name(),
                chain.len()
            )));
        }
        if let Some(i) = joint_angles.iter().position(|a| !a.is_finite()) {
            return Err(Error::NonFinite(format!("robot joint {i} angle {}", joint_angles[i])));
        }
        Ok(())
    }

    /// Zero angles, clamped into the limits.
    pub fn zero(chain: &KinematicChain) -> Result<Self> {
        Self::new(chain, vec![0.0; chain.len()])
    }

    pub fn joint_angles(&self) -> &[f64] {
        &self.joint_angles
    }

    pub fn len(&self) -> usize {
        self.joint_angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joint_angles.is_empty()
    }
}

/// Global rotations of the four semantic arm links, in
/// [`SemanticLinks::NAMES`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkRotationSet {
    rotations: [Quat; 4],
}

impl LinkRotationSet {
    pub fn new(rotations: [Quat; 4]) -> Result<Self> {
        for (k, q) in rotations.iter().enumerate() {
            if !q.is_unit() {
                return Err(Error::Validation(format!(
                    "link {} rotation norm {} is not 1",
                    SemanticLinks::NAMES[k],
                    q.norm()
                )));
            }
        }
        Ok(LinkRotationSet { rotations })
    }

    pub(crate) fn new_unchecked(rotations: [Quat; 4]) -> Self {
        LinkRotationSet { rotations }
    }

    /// Builds a set from a name-keyed map; the key set must be exactly the
    /// four semantic link names.
    pub fn from_map(map: &BTreeMap<String, Quat>) -> Result<Self> {
        let mut rotations = [Quat::IDENTITY; 4];
        if map.len() != 4 {
            return Err(Error::Validation(format!(
                "link rotation set needs exactly {:?}, got {:?}",
                SemanticLinks::NAMES,
                map.keys().collect::<Vec<_>>()
            )));
        }
        for (k, name) in SemanticLinks::NAMES.iter().enumerate() {
            rotations[k] = *map.get(*name).ok_or_else(|| {
                Error::Validation(format!("link rotation set is missing '{name}' (got {:?})", map.keys().collect::<Vec<_>>()))
            })?;
        }
        Self::new(rotations)
    }

    pub fn to_map(&self) -> BTreeMap<String, Quat> {
        SemanticLinks::NAMES.iter().map(|n| n.to_string()).zip(self.rotations).collect()
    }

    pub fn rotations(&self) -> &[Quat; 4] {
        &self.rotations
    }

    /// The 16 components, link-major, `w, x, y, z` per link.
    pub fn to_flat(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for (k, q) in self.rotations.iter().enumerate() {
            out[4 * k..4 * k + 4].copy_from_slice(&q.as_array());
        }
        out
    }

    pub fn from_flat(values: &[f64]) -> Result<Self> {
        if values.len() != 16 {
            return Err(Error::ShapeMismatch(format!("link rotation row has {} values, expected 16", values.len())));
        }
        let mut rotations = [Quat::IDENTITY; 4];
        for (k, c) in values.chunks_exact(4).enumerate() {
            rotations[k] = Quat::from_raw(c[0], c[1], c[2], c[3]);
        }
        Self::new(rotations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn robot_pose_clamps() {
        let chain = KinematicChain::builtin("toy-robot-8").unwrap();
        let p = RobotPose::new(&chain, vec![10.0; 8]).unwrap();
        for (a, j) in p.joint_angles().iter().zip(chain.joints()) {
            assert_eq!(*a, j.range().1);
        }
        assert!(RobotPose::new_strict(&chain, vec![10.0; 8]).is_err());
        assert!(RobotPose::new(&chain, vec![0.0; 7]).is_err());
        assert!(RobotPose::new(&chain, vec![f64::NAN; 8]).is_err());
    }

    #[test]
    fn human_pose_validation() {
        let chain = KinematicChain::builtin("human-upper-14").unwrap();
        let mut flat = HumanPose::rest(&chain).unwrap().to_flat();
        assert!(HumanPose::from_flat(&chain, &flat).is_ok());
        flat[0] = 0.5;
        assert!(HumanPose::from_flat(&chain, &flat).is_err());
        let robot = KinematicChain::builtin("toy-robot-8").unwrap();
        assert!(matches!(HumanPose::rest(&robot), Err(Error::ChainMismatch(_))));
    }

    #[test]
    fn human_pose_canonicalizes() {
        let chain = KinematicChain::builtin("human-upper-14").unwrap();
        let mut q = vec![Quat::IDENTITY; 14];
        q[3] = Quat::from_raw(-1.0, 0.0, 0.0, 0.0);
        let p = HumanPose::new(&chain, q).unwrap();
        assert_eq!(p.local_rotations()[3], Quat::IDENTITY);
    }

    #[test]
    fn link_set_from_map_checks_keys() {
        let set = LinkRotationSet::new([Quat::IDENTITY; 4]).unwrap();
        let mut map = set.to_map();
        assert_eq!(LinkRotationSet::from_map(&map).unwrap(), set);
        let q = map.remove("left_upper_arm").unwrap();
        map.insert("left_thigh".into(), q);
        assert!(LinkRotationSet::from_map(&map).is_err());
    }
}
