//! Unsupervised human-to-robot pose retargeting.
//!
//! Human and robot poses are embedded into one latent space by two
//! encoders trained with a triplet loss over a global link-rotation
//! distance; a decoder maps latent codes to robot joint angles.

pub mod baseline;
pub mod chain;
pub mod data;
pub mod error;
pub mod eval;
pub mod io;
pub mod kinematics;
pub mod nn;
pub mod pose;
pub mod quat;
pub mod rng;
pub mod runtime;
pub mod train;

pub use chain::{Domain, JointKind, JointLimits, JointSpec, KinematicChain, SemanticLinks};
pub use error::{Error, Result};
pub use kinematics::{forward_kinematics, rotation_distance, semantic_link_rotations};
pub use pose::{HumanPose, LinkRotationSet, RobotPose};
pub use quat::Quat;
