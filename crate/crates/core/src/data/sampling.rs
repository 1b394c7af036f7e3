use rand::Rng as _;
use std::f64::consts::TAU;

use crate::chain::{Domain, KinematicChain};
use crate::error::Result;
use crate::pose::{HumanPose, RobotPose};
use crate::quat::Quat;
use crate::rng::Rng;

/// Each joint angle drawn uniformly within its limits.
pub fn sample_robot_pose(chain: &KinematicChain, rng: &mut Rng) -> Result<RobotPose> {
    chain.require_domain(Domain::Robot)?;
    let angles = chain
        .joints()
        .iter()
        .map(|j| {
            let (lo, hi) = j.range();
            if lo == hi {
                lo
            } else {
                rng.gen_range(lo..=hi)
            }
        })
        .collect();
    RobotPose::new(chain, angles)
}

/// Each joint rotated about a uniformly random axis by an angle uniform in
/// `[0, max_swing]`.
pub fn sample_human_pose(chain: &KinematicChain, rng: &mut Rng) -> Result<HumanPose> {
    chain.require_domain(Domain::Human)?;
    let rotations = chain
        .joints()
        .iter()
        .map(|j| {
            let swing = j.max_swing();
            let axis = random_unit_vector(rng);
            let angle = if swing > 0.0 { rng.gen_range(0.0..=swing) } else { 0.0 };
            Quat::axis_angle_unchecked(axis, angle)
        })
        .collect();
    HumanPose::new(chain, rotations)
}

/// Uniform on the unit sphere (Archimedes: uniform height, uniform azimuth).
pub fn random_unit_vector(rng: &mut Rng) -> [f64; 3] {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi: f64 = rng.gen_range(0.0..TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    [r * phi.cos(), r * phi.sin(), z]
}

/// Uniformly random unit quaternion (Shoemake's method), canonicalized.
pub fn random_rotation(rng: &mut Rng) -> Quat {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen_range(0.0..TAU);
    let u3: f64 = rng.gen_range(0.0..TAU);
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    Quat::from_raw(a * u2.sin(), a * u2.cos(), b * u3.sin(), b * u3.cos()).normalized().canonicalize()
}
