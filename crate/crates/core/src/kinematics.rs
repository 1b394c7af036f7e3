//! Rotation-only forward kinematics and the cross-domain link distance.

use crate::chain::{JointKind, KinematicChain};
use crate::error::{Error, Result};
use crate::pose::{HumanPose, LinkRotationSet, RobotPose};
use crate::quat::Quat;

/// A pose of either domain.
#[derive(Debug, Clone, Copy)]
pub enum PoseRef<'a> {
    Human(&'a HumanPose),
    Robot(&'a RobotPose),
}

impl<'a> From<&'a HumanPose> for PoseRef<'a> {
    fn from(p: &'a HumanPose) -> Self {
        PoseRef::Human(p)
    }
}

impl<'a> From<&'a RobotPose> for PoseRef<'a> {
    fn from(p: &'a RobotPose) -> Self {
        PoseRef::Robot(p)
    }
}

impl PoseRef<'_> {
    fn len(&self) -> usize {
        match self {
            PoseRef::Human(p) => p.len(),
            PoseRef::Robot(p) => p.len(),
        }
    }
}

/// Global rotation of every joint frame:
/// `global[j] = global[parent(j)] * rest[j] * local[j]`.
pub fn forward_kinematics<'a>(chain: &KinematicChain, pose: impl Into<PoseRef<'a>>) -> Result<Vec<Quat>> {
    let pose = pose.into();
    if pose.len() != chain.len() {
        return Err(Error::ChainMismatch(format!(
            "pose has {} joints, chain '{}' has {}",
            pose.len(),
            chain.name(),
            chain.len()
        )));
    }
    let mut globals = Vec::with_capacity(chain.len());
    for (j, spec) in chain.joints().iter().enumerate() {
        let local = match (spec.kind, pose) {
            (JointKind::Spherical, PoseRef::Human(p)) => p.local_rotations()[j],
            (JointKind::Revolute, PoseRef::Robot(p)) => Quat::axis_angle_unchecked(chain.axis(j), p.joint_angles()[j]),
            (kind, _) => {
                return Err(Error::ChainMismatch(format!(
                    "joint {j} of chain '{}' is {kind:?} but the pose supplies the other kind",
                    chain.name()
                )))
            }
        };
        globals.push(compose(chain, &globals, j, &local));
    }
    Ok(globals)
}

#[inline]
fn compose(chain: &KinematicChain, globals: &[Quat], j: usize, local: &Quat) -> Quat {
    let offset = chain.rest(j).hamilton(local);
    match chain.joints()[j].parent {
        Some(p) => globals[p].multiply(&offset),
        None => offset.normalized().canonicalize(),
    }
}

/// Global rotations of the chain's four semantic links.
pub fn semantic_link_rotations<'a>(chain: &KinematicChain, pose: impl Into<PoseRef<'a>>) -> Result<LinkRotationSet> {
    let globals = forward_kinematics(chain, pose)?;
    Ok(select_links(chain, &globals))
}

fn select_links(chain: &KinematicChain, globals: &[Quat]) -> LinkRotationSet {
    let idx = chain.semantic_links().indices();
    LinkRotationSet::new_unchecked(idx.map(|i| globals[i]))
}

/// Semantic link rotations for raw joint angles of an all-revolute chain,
/// skipping pose validation. Used on optimizer inner loops; `angles` must
/// have one entry per joint.
pub fn robot_link_rotations(chain: &KinematicChain, angles: &[f64]) -> LinkRotationSet {
    debug_assert_eq!(angles.len(), chain.len());
    let mut globals = Vec::with_capacity(chain.len());
    for (j, a) in angles.iter().enumerate() {
        let local = Quat::axis_angle_unchecked(chain.axis(j), *a);
        globals.push(compose(chain, &globals, j, &local));
    }
    select_links(chain, &globals)
}

/// Sum over the four links of `1 - <q_a, q_b>^2`. Lies in `[0, 4]`.
pub fn rotation_distance(a: &LinkRotationSet, b: &LinkRotationSet) -> f64 {
    a.rotations()
        .iter()
        .zip(b.rotations())
        .map(|(p, q)| {
            let d = p.dot(q);
            1.0 - d * d
        })
        .sum::<f64>()
        .clamp(0.0, 4.0)
}

/// Same distance on flattened 16-component rows (see [`LinkRotationSet::to_flat`]).
#[inline]
pub fn rotation_distance_flat(a: &[f32], b: &[f32]) -> f64 {
    debug_assert!(a.len() == 16 && b.len() == 16);
    let mut total = 0.0f64;
    for k in 0..4 {
        let o = 4 * k;
        let d = a[o] as f64 * b[o] as f64
            + a[o + 1] as f64 * b[o + 1] as f64
            + a[o + 2] as f64 * b[o + 2] as f64
            + a[o + 3] as f64 * b[o + 3] as f64;
        total += 1.0 - d * d;
    }
    total.clamp(0.0, 4.0)
}

/// A human pose whose semantic links have exactly the given global
/// rotations; every other joint stays at rest.
pub fn human_pose_from_links(chain: &KinematicChain, links: &LinkRotationSet) -> Result<HumanPose> {
    let idx = chain.semantic_links().indices();
    let mut locals = vec![Quat::IDENTITY; chain.len()];
    let mut globals: Vec<Quat> = Vec::with_capacity(chain.len());
    for j in 0..chain.len() {
        if let Some(k) = idx.iter().position(|&i| i == j) {
            let parent = chain.joints()[j].parent.map(|p| globals[p]).unwrap_or(Quat::IDENTITY);
            let frame = parent.hamilton(chain.rest(j));
            locals[j] = frame.conjugate().multiply(&links.rotations()[k]);
        }
        globals.push(compose(chain, &globals, j, &locals[j]));
    }
    HumanPose::new(chain, locals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{JointLimits, JointSpec, SemanticLinks};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn serial_z(n: usize) -> KinematicChain {
        let joints = (0..n)
            .map(|i| JointSpec {
                name: format!("j{i}"),
                parent: i.checked_sub(1),
                kind: JointKind::Revolute,
                axis: Some([0.0, 0.0, 1.0]),
                limits: JointLimits::Range([-PI, PI]),
                rest_rotation: [1.0, 0.0, 0.0, 0.0],
            })
            .collect();
        let links = SemanticLinks { left_upper_arm: 0, left_lower_arm: 1, right_upper_arm: 2, right_lower_arm: 3 };
        KinematicChain::new("serial", joints, links).unwrap()
    }

    #[test]
    fn identity_chain() {
        let chain = KinematicChain::builtin("human-upper-14").unwrap();
        let globals = forward_kinematics(&chain, &HumanPose::rest(&chain).unwrap()).unwrap();
        assert!(globals.iter().all(|q| *q == Quat::IDENTITY));
    }

    #[test]
    fn serial_composition() {
        let chain = serial_z(4);
        let pose = RobotPose::new(&chain, vec![FRAC_PI_2, FRAC_PI_2, 0.0, 0.0]).unwrap();
        let g = forward_kinematics(&chain, &pose).unwrap();
        let expected = Quat::from_axis_angle([0.0, 0.0, 1.0], PI).unwrap();
        for (a, b) in g[1].as_array().iter().zip(expected.as_array()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fast_path_matches_validated_path() {
        let chain = KinematicChain::builtin("tiago-like-14").unwrap();
        let angles: Vec<f64> = (0..14).map(|i| 0.1 * i as f64 - 0.5).collect();
        let pose = RobotPose::new(&chain, angles.clone()).unwrap();
        let slow = semantic_link_rotations(&chain, &pose).unwrap();
        assert_eq!(slow, robot_link_rotations(&chain, pose.joint_angles()));
    }

    #[test]
    fn mismatched_pose_rejected() {
        let human = KinematicChain::builtin("human-upper-14").unwrap();
        let robot = KinematicChain::builtin("toy-robot-8").unwrap();
        let rp = RobotPose::zero(&robot).unwrap();
        assert!(forward_kinematics(&human, &rp).is_err());
    }

    #[test]
    fn distance_examples() {
        let id = LinkRotationSet::new([Quat::IDENTITY; 4]).unwrap();
        assert_eq!(rotation_distance(&id, &id), 0.0);
        let quarter = Quat::from_axis_angle([0.0, 1.0, 0.0], FRAC_PI_2).unwrap();
        let one = LinkRotationSet::new([quarter, Quat::IDENTITY, Quat::IDENTITY, Quat::IDENTITY]).unwrap();
        assert!((rotation_distance(&id, &one) - 0.5).abs() < 1e-12);
        let half = Quat::from_axis_angle([1.0, 0.0, 0.0], PI).unwrap();
        let all = LinkRotationSet::new([half; 4]).unwrap();
        assert!((rotation_distance(&id, &all) - 4.0).abs() < 1e-12);
        let q = Quat::from_axis_angle([0.0, 0.6, 0.8], 0.7).unwrap();
        let a = LinkRotationSet::new([q, q, q, q]).unwrap();
        let b = LinkRotationSet::new([q.neg(), q, q, q]).unwrap();
        assert!(rotation_distance(&a, &b).abs() < 1e-15);
    }
}
