//! Reference retargets: robot angles minimizing the link-rotation distance.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{Domain, KinematicChain};
use crate::error::{Error, Result};
use crate::kinematics::{robot_link_rotations, rotation_distance, semantic_link_rotations};
use crate::pose::{HumanPose, LinkRotationSet, RobotPose};
use crate::rng::derive_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub restarts: usize,
    pub initial_step: f64,
    pub halvings: usize,
    /// Cap on full sweeps at one step size.
    pub max_sweeps: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { restarts: 32, initial_step: 0.2, halvings: 6, max_sweeps: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub pose: RobotPose,
    pub distance: f64,
}

fn descend(chain: &KinematicChain, ranges: &[(f64, f64)], target: &LinkRotationSet, start: Vec<f64>, config: &OracleConfig) -> (Vec<f64>, f64) {
    let mut theta = start;
    let mut best = rotation_distance(&robot_link_rotations(chain, &theta), target);
    let mut step = config.initial_step;
    for _ in 0..=config.halvings {
        for _ in 0..config.max_sweeps {
            let mut improved = false;
            for j in 0..theta.len() {
                let (lo, hi) = ranges[j];
                let keep = theta[j];
                for cand in [(keep + step).min(hi), (keep - step).max(lo)] {
                    if cand == theta[j] {
                        continue;
                    }
                    let old = theta[j];
                    theta[j] = cand;
                    let d = rotation_distance(&robot_link_rotations(chain, &theta), target);
                    if d < best {
                        best = d;
                        improved = true;
                    } else {
                        theta[j] = old;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        step *= 0.5;
    }
    (theta, best)
}

/// Multi-start coordinate descent with step halving. Restart 0 starts at
/// the zero pose (clamped into the limits), restart `k > 0` at a uniform
/// random pose from stream `k` of `seed`, so a larger budget only adds
/// starts and never yields a worse result.
pub fn oracle_retarget_links(chain_r: &KinematicChain, target: &LinkRotationSet, config: &OracleConfig, seed: u64) -> Result<OracleResult> {
    chain_r.require_domain(Domain::Robot)?;
    if config.restarts == 0 {
        return Err(Error::Validation("oracle needs at least one restart".into()));
    }
    let ranges = chain_r.ranges();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for k in 0..config.restarts {
        let start: Vec<f64> = if k == 0 {
            ranges.iter().map(|&(lo, hi)| 0.0f64.clamp(lo, hi)).collect()
        } else {
            let mut rng = derive_rng(seed, k as u64);
            ranges.iter().map(|&(lo, hi)| if lo == hi { lo } else { rng.gen_range(lo..=hi) }).collect()
        };
        let (theta, d) = descend(chain_r, &ranges, target, start, config);
        if best.as_ref().map_or(true, |b| d < b.1) {
            best = Some((theta, d));
        }
    }
    let (theta, distance) = best.expect("at least one restart");
    Ok(OracleResult { pose: RobotPose::new_strict(chain_r, theta)?, distance })
}

pub fn oracle_retarget(chain_h: &KinematicChain, chain_r: &KinematicChain, pose: &HumanPose, config: &OracleConfig, seed: u64) -> Result<OracleResult> {
    let target = semantic_link_rotations(chain_h, pose)?;
    oracle_retarget_links(chain_r, &target, config, seed)
}

/// Oracle over many poses; pose `i` uses seed `seed + i`. Output order
/// follows input order for any worker count.
pub fn oracle_batch(
    chain_h: &KinematicChain,
    chain_r: &KinematicChain,
    poses: &[HumanPose],
    config: &OracleConfig,
    seed: u64,
    workers: usize,
) -> Result<Vec<OracleResult>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Validation(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        poses
            .par_iter()
            .enumerate()
            .map(|(i, p)| oracle_retarget(chain_h, chain_r, p, config, seed.wrapping_add(i as u64)))
            .collect()
    })
}
