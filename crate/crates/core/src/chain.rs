//! Kinematic chain descriptions for human skeletons and robot arms.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::quat::{Quat, UNIT_TOLERANCE};

/// Which side of the retargeting problem a chain or pose belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Human,
    Robot,
}

impl Domain {
    pub fn as_str(&self) -> &'static str {
        match self {
            Domain::Human => "human",
            Domain::Robot => "robot",
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            Domain::Human => 0,
            Domain::Robot => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Domain> {
        match code {
            0 => Some(Domain::Human),
            1 => Some(Domain::Robot),
            _ => None,
        }
    }

    pub fn other(&self) -> Domain {
        match self {
            Domain::Human => Domain::Robot,
            Domain::Robot => Domain::Human,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "human" => Ok(Domain::Human),
            "robot" => Ok(Domain::Robot),
            other => Err(Error::Validation(format!("unknown domain '{other}' (expected human or robot)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Spherical,
    Revolute,
}

/// Joint range: an angle interval for revolute joints, a maximum swing
/// away from the rest orientation for spherical ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JointLimits {
    Range([f64; 2]),
    Swing(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    pub name: String,
    pub parent: Option<usize>,
    pub kind: JointKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<[f64; 3]>,
    pub limits: JointLimits,
    #[serde(default = "identity_wxyz")]
    pub rest_rotation: [f64; 4],
}

fn identity_wxyz() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

impl JointSpec {
    /// `[min, max]` for revolute joints.
    pub fn range(&self) -> (f64, f64) {
        match self.limits {
            JointLimits::Range([lo, hi]) => (lo, hi),
            JointLimits::Swing(s) => (0.0, s),
        }
    }

    pub fn max_swing(&self) -> f64 {
        match self.limits {
            JointLimits::Swing(s) => s,
            JointLimits::Range([_, hi]) => hi,
        }
    }
}

/// Joint indices whose global rotation represents each of the four arm links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticLinks {
    pub left_upper_arm: usize,
    pub left_lower_arm: usize,
    pub right_upper_arm: usize,
    pub right_lower_arm: usize,
}

impl SemanticLinks {
    pub const NAMES: [&'static str; 4] = ["left_upper_arm", "left_lower_arm", "right_upper_arm", "right_lower_arm"];

    pub fn indices(&self) -> [usize; 4] {
        [self.left_upper_arm, self.left_lower_arm, self.right_upper_arm, self.right_lower_arm]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ChainFile {
    name: String,
    joints: Vec<JointSpec>,
    semantic_links: SemanticLinks,
}

/// A validated forest of joints in topological order.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicChain {
    name: String,
    joints: Vec<JointSpec>,
    semantic_links: SemanticLinks,
    // cached per-joint data used on the hot FK path
    rests: Vec<Quat>,
    axes: Vec<[f64; 3]>,
    domain: Option<Domain>,
}

/// Names of the chain configs shipped with the library.
pub const BUILTIN_CHAINS: [&str; 3] = ["human-upper-14", "toy-robot-8", "tiago-like-14"];

impl KinematicChain {
    pub fn new(name: impl Into<String>, joints: Vec<JointSpec>, semantic_links: SemanticLinks) -> Result<Self> {
        let name = name.into();
        if joints.is_empty() {
            return Err(Error::Validation(format!("chain '{name}' has no joints")));
        }
        let mut rests = Vec::with_capacity(joints.len());
        let mut axes = Vec::with_capacity(joints.len());
        for (i, j) in joints.iter().enumerate() {
            let ctx = |msg: String| Error::Validation(format!("chain '{name}', joint {i} ('{}'): {msg}", j.name));
            if let Some(p) = j.parent {
                if p >= i {
                    return Err(ctx(format!("parent {p} does not precede the joint")));
                }
            }
            match (j.kind, j.limits) {
                (JointKind::Revolute, JointLimits::Range([lo, hi])) => {
                    if !lo.is_finite() || !hi.is_finite() || lo > hi {
                        return Err(ctx(format!("invalid limits [{lo}, {hi}]")));
                    }
                }
                (JointKind::Spherical, JointLimits::Swing(s)) => {
                    if !s.is_finite() || s < 0.0 {
                        return Err(ctx(format!("invalid max swing {s}")));
                    }
                }
                (JointKind::Revolute, _) => return Err(ctx("revolute joint needs [min, max] limits".into())),
                (JointKind::Spherical, _) => return Err(ctx("spherical joint needs a scalar max swing".into())),
            }
            let axis = match (j.kind, j.axis) {
                (JointKind::Revolute, Some(a)) => {
                    let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
                    if (n - 1.0).abs() > UNIT_TOLERANCE {
                        return Err(ctx(format!("axis norm {n} is not 1")));
                    }
                    a
                }
                (JointKind::Revolute, None) => return Err(ctx("revolute joint has no axis".into())),
                (JointKind::Spherical, _) => [0.0, 0.0, 0.0],
            };
            let [w, x, y, z] = j.rest_rotation;
            let rest = Quat::new(w, x, y, z).map_err(|e| ctx(format!("rest rotation: {e}")))?;
            rests.push(rest);
            axes.push(axis);
        }
        let idx = semantic_links.indices();
        for (k, &i) in idx.iter().enumerate() {
            if i >= joints.len() {
                return Err(Error::Validation(format!(
                    "chain '{name}': semantic link {} points at joint {i}, chain has {}",
                    SemanticLinks::NAMES[k],
                    joints.len()
                )));
            }
            if idx[..k].contains(&i) {
                return Err(Error::Validation(format!("chain '{name}': semantic links must use distinct joints")));
            }
        }
        let domain = if joints.iter().all(|j| j.kind == JointKind::Spherical) {
            Some(Domain::Human)
        } else if joints.iter().all(|j| j.kind == JointKind::Revolute) {
            Some(Domain::Robot)
        } else {
            None
        };
        Ok(KinematicChain { name, joints, semantic_links, rests, axes, domain })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ChainFile = serde_json::from_str(text)?;
        Self::new(file.name, file.joints, file.semantic_links)
    }

    pub fn to_json(&self) -> String {
        let file = ChainFile {
            name: self.name.clone(),
            joints: self.joints.clone(),
            semantic_links: self.semantic_links,
        };
        serde_json::to_string_pretty(&file).expect("chain serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn builtin(name: &str) -> Option<Self> {
        let text = match name {
            "human-upper-14" => include_str!("../chains/human-upper-14.json"),
            "toy-robot-8" => include_str!("../chains/toy-robot-8.json"),
            "tiago-like-14" => include_str!("../chains/tiago-like-14.json"),
            _ => return None,
        };
        Some(Self::from_json(text).expect("builtin chain config is valid"))
    }

    /// A built-in chain name, or else a path to a chain JSON file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        if let Some(c) = Self::builtin(name_or_path) {
            return Ok(c);
        }
        let path = Path::new(name_or_path);
        if path.exists() {
            return Self::load(path);
        }
        Err(Error::Validation(format!(
            "unknown chain '{name_or_path}': not a built-in ({}) and no such file",
            BUILTIN_CHAINS.join(", ")
        )))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn semantic_links(&self) -> &SemanticLinks {
        &self.semantic_links
    }

    /// `Human` for all-spherical chains, `Robot` for all-revolute, `None` if mixed.
    pub fn domain(&self) -> Option<Domain> {
        self.domain
    }

    /// Number of reals per flattened pose: 4 per spherical joint, 1 per revolute.
    pub fn pose_width(&self) -> usize {
        self.joints
            .iter()
            .map(|j| match j.kind {
                JointKind::Spherical => 4,
                JointKind::Revolute => 1,
            })
            .sum()
    }

    pub(crate) fn rest(&self, j: usize) -> &Quat {
        &self.rests[j]
    }

    pub(crate) fn axis(&self, j: usize) -> [f64; 3] {
        self.axes[j]
    }

    pub fn require_domain(&self, domain: Domain) -> Result<()> {
        if self.domain == Some(domain) {
            Ok(())
        } else {
            Err(Error::ChainMismatch(format!(
                "chain '{}' is not a {domain} chain (needs all {} joints)",
                self.name,
                match domain {
                    Domain::Human => "spherical",
                    Domain::Robot => "revolute",
                }
            )))
        }
    }

    /// True if `j` is `root` or a descendant of it.
    pub fn in_subtree(&self, root: usize, mut j: usize) -> bool {
        loop {
            if j == root {
                return true;
            }
            match self.joints[j].parent {
                Some(p) => j = p,
                None => return false,
            }
        }
    }

    /// Revolute `(min, max)` per joint.
    pub fn ranges(&self) -> Vec<(f64, f64)> {
        self.joints.iter().map(|j| j.range()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn revolute(name: &str, parent: Option<usize>, axis: [f64; 3]) -> JointSpec {
        JointSpec {
            name: name.into(),
            parent,
            kind: JointKind::Revolute,
            axis: Some(axis),
            limits: JointLimits::Range([-1.0, 1.0]),
            rest_rotation: identity_wxyz(),
        }
    }

    fn links() -> SemanticLinks {
        SemanticLinks { left_upper_arm: 0, left_lower_arm: 1, right_upper_arm: 2, right_lower_arm: 3 }
    }

    #[test]
    fn builtins_load() {
        for name in BUILTIN_CHAINS {
            let c = KinematicChain::builtin(name).unwrap();
            assert_eq!(c.name(), name);
        }
        let human = KinematicChain::builtin("human-upper-14").unwrap();
        assert_eq!(human.len(), 14);
        assert_eq!(human.domain(), Some(Domain::Human));
        assert_eq!(human.pose_width(), 56);
        let toy = KinematicChain::builtin("toy-robot-8").unwrap();
        assert_eq!(toy.domain(), Some(Domain::Robot));
        assert_eq!(toy.pose_width(), 8);
        assert_eq!(KinematicChain::builtin("tiago-like-14").unwrap().len(), 14);
    }

    #[test]
    fn json_round_trip() {
        let c = KinematicChain::builtin("toy-robot-8").unwrap();
        let back = KinematicChain::from_json(&c.to_json()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn rejects_bad_topology() {
        let mut joints: Vec<_> = (0..4).map(|i| revolute(&format!("j{i}"), None, [0.0, 0.0, 1.0])).collect();
        joints[1].parent = Some(2);
        assert!(KinematicChain::new("bad", joints, links()).is_err());
    }

    #[test]
    fn rejects_non_unit_axis_and_bad_limits() {
        let mut joints: Vec<_> = (0..4).map(|i| revolute(&format!("j{i}"), None, [0.0, 0.0, 1.0])).collect();
        joints[0].axis = Some([0.0, 1.0, 1.0]);
        assert!(KinematicChain::new("bad", joints.clone(), links()).is_err());
        joints[0].axis = Some([0.0, 1.0, 0.0]);
        joints[2].limits = JointLimits::Range([1.0, -1.0]);
        assert!(KinematicChain::new("bad", joints.clone(), links()).is_err());
        joints[2].limits = JointLimits::Range([f64::NEG_INFINITY, 1.0]);
        assert!(KinematicChain::new("bad", joints, links()).is_err());
    }

    #[test]
    fn rejects_duplicate_semantic_links() {
        let joints: Vec<_> = (0..4).map(|i| revolute(&format!("j{i}"), None, [0.0, 0.0, 1.0])).collect();
        let mut l = links();
        l.right_lower_arm = 0;
        assert!(KinematicChain::new("dup", joints.clone(), l).is_err());
        l.right_lower_arm = 9;
        assert!(KinematicChain::new("oob", joints, l).is_err());
    }

    #[test]
    fn subtree_membership() {
        let c = KinematicChain::builtin("human-upper-14").unwrap();
        let ls = c.semantic_links().left_upper_arm;
        assert!(c.in_subtree(0, ls));
        assert!(!c.in_subtree(ls, 0));
    }
}
