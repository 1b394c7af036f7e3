//! Motion traces: time-stamped pose sequences stored as JSON lines.
//!
//! The first line is a header object `{"chain", "frame_rate", "domain"}`;
//! every following line is one frame, a JSON array in pose-row layout.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use crate::chain::{Domain, KinematicChain};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::pose::{HumanPose, RobotPose};
use crate::quat::UNIT_TOLERANCE;

#[derive(Debug, Clone, PartialEq)]
pub struct MotionTrace {
    pub chain_name: String,
    pub domain: Domain,
    pub frame_rate: f64,
    pub frames: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct TraceHeader {
    chain: String,
    frame_rate: f64,
    domain: Domain,
}

impl MotionTrace {
    pub fn from_human(chain: &KinematicChain, frame_rate: f64, poses: &[HumanPose]) -> Result<Self> {
        let trace = MotionTrace {
            chain_name: chain.name().to_string(),
            domain: Domain::Human,
            frame_rate,
            frames: poses.iter().map(HumanPose::to_flat).collect(),
        };
        trace.check_basic()?;
        Ok(trace)
    }

    pub fn from_robot(chain: &KinematicChain, frame_rate: f64, poses: &[RobotPose]) -> Result<Self> {
        let trace = MotionTrace {
            chain_name: chain.name().to_string(),
            domain: Domain::Robot,
            frame_rate,
            frames: poses.iter().map(|p| p.joint_angles().to_vec()).collect(),
        };
        trace.check_basic()?;
        Ok(trace)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Checks that need no chain: non-empty, positive rate, consistent
    /// widths, finite values, unit quaternions for human frames.
    pub fn check_basic(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::Validation("empty trace".into()));
        }
        if !(self.frame_rate.is_finite() && self.frame_rate > 0.0) {
            return Err(Error::Validation(format!("frame rate {} must be positive", self.frame_rate)));
        }
        let width = self.frames[0].len();
        for (i, frame) in self.frames.iter().enumerate() {
            if frame.len() != width {
                return Err(Error::Validation(format!("frame {i} has {} values, frame 0 has {width}", frame.len())));
            }
            if frame.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("frame {i} contains a non-finite value")));
            }
            if self.domain == Domain::Human {
                if width % 4 != 0 {
                    return Err(Error::Validation(format!("human frame {i} width {width} is not a multiple of 4")));
                }
                for (j, q) in frame.chunks_exact(4).enumerate() {
                    let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
                    if (n - 1.0).abs() > UNIT_TOLERANCE {
                        return Err(Error::Validation(format!("frame {i}: joint {j} quaternion norm {n} is not 1")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Full validation against a chain; errors name the offending frame.
    pub fn validate(&self, chain: &KinematicChain) -> Result<()> {
        self.check_basic()?;
        if chain.name() != self.chain_name {
            return Err(Error::ChainMismatch(format!(
                "trace is for chain '{}', got chain '{}'",
                self.chain_name,
                chain.name()
            )));
        }
        chain.require_domain(self.domain)?;
        for i in 0..self.frames.len() {
            match self.domain {
                Domain::Human => self.human_frame(chain, i).map(|_| ()),
                Domain::Robot => self.robot_frame(chain, i).map(|_| ()),
            }?;
        }
        Ok(())
    }

    pub fn human_frame(&self, chain: &KinematicChain, i: usize) -> Result<HumanPose> {
        HumanPose::from_flat(chain, &self.frames[i]).map_err(|e| frame_error(i, e))
    }

    pub fn robot_frame(&self, chain: &KinematicChain, i: usize) -> Result<RobotPose> {
        RobotPose::new_strict(chain, self.frames[i].clone()).map_err(|e| frame_error(i, e))
    }

    pub fn to_jsonl(&self) -> String {
        let header = TraceHeader { chain: self.chain_name.clone(), frame_rate: self.frame_rate, domain: self.domain };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for frame in &self.frames {
            let _ = writeln!(out, "{}", serde_json::to_string(frame).expect("frame serializes"));
        }
        out
    }

    pub fn from_jsonl(text: &str, path: &Path) -> Result<Self> {
        let malformed = |detail: String| Error::Malformed { path: path.to_path_buf(), detail };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or_else(|| malformed("missing header line".into()))?;
        let header: TraceHeader = serde_json::from_str(first).map_err(|e| malformed(format!("header: {e}")))?;
        let mut frames = Vec::new();
        for (line_no, line) in lines {
            let frame: Vec<f64> =
                serde_json::from_str(line).map_err(|e| malformed(format!("line {}: {e}", line_no + 1)))?;
            frames.push(frame);
        }
        let trace = MotionTrace { chain_name: header.chain, domain: header.domain, frame_rate: header.frame_rate, frames };
        trace.check_basic()?;
        Ok(trace)
    }
}

fn frame_error(i: usize, e: Error) -> Error {
    match e {
        Error::ChainMismatch(m) => Error::ChainMismatch(format!("frame {i}: {m}")),
        other => Error::Validation(format!("frame {i}: {other}")),
    }
}

pub fn save_motion_trace(trace: &MotionTrace, path: &Path) -> Result<()> {
    trace.check_basic()?;
    write_atomic(path, trace.to_jsonl().as_bytes())
}

pub fn load_motion_trace(path: &Path) -> Result<MotionTrace> {
    let text = std::fs::read_to_string(path)?;
    MotionTrace::from_jsonl(&text, path)
}
