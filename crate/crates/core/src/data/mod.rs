//! Pose sampling and persisted datasets.

pub mod bank;
pub mod sampling;
pub mod trace;

pub use bank::{build_pose_bank, load_pose_bank, save_pose_bank, PoseBank};
pub use sampling::{sample_human_pose, sample_robot_pose};
pub use trace::{load_motion_trace, save_motion_trace, MotionTrace};
