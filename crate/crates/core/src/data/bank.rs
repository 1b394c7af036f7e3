//! Pose banks: sampled poses of one domain with precomputed link rotations.
//!
//! On-disk layout (all integers and floats little-endian):
//!
//! | offset | size | field                                              |
//! |--------|------|----------------------------------------------------|
//! | 0      | 8    | magic `RTGTBANK`                                   |
//! | 8      | 4    | format version                                     |
//! | 12     | 1    | domain (0 human, 1 robot)                          |
//! | 16     | 4    | joint count                                        |
//! | 20     | 4    | pose row width                                     |
//! | 24     | 8    | row count                                          |
//! | 32     | 8    | seed                                               |
//! | 40     | 8    | CRC-32 of the whole file with this field zeroed    |
//! | 48     | 4    | byte length of the embedded chain JSON             |
//! | 64     | ..   | chain JSON, then `N * width` pose floats, then `N * 16` link floats |
//!
//! Unlisted header bytes are zero.

use rayon::prelude::*;
use std::path::Path;

use crate::chain::{Domain, KinematicChain};
use crate::data::sampling::{sample_human_pose, sample_robot_pose};
use crate::error::{Error, Result};
use crate::io::{crc, push_f32s, read_f32s, read_u32, read_u64, write_atomic};
use crate::kinematics::semantic_link_rotations;
use crate::pose::{HumanPose, LinkRotationSet, RobotPose};
use crate::rng::derive_rng;

pub const BANK_MAGIC: &[u8; 8] = b"RTGTBANK";
pub const BANK_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 64;
const CHECKSUM_AT: usize = 40;

/// Maximum per-component deviation between stored and recomputed link rotations.
pub const LINK_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PoseBank {
    domain: Domain,
    chain: KinematicChain,
    seed: u64,
    width: usize,
    poses: Vec<f32>,
    link_rotations: Vec<f32>,
}

impl PoseBank {
    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn chain(&self) -> &KinematicChain {
        &self.chain
    }

    pub fn chain_name(&self) -> &str {
        self.chain.name()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        if self.width == 0 {
            0
        } else {
            self.poses.len() / self.width
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Floats per pose row.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pose_row(&self, i: usize) -> &[f32] {
        &self.poses[i * self.width..(i + 1) * self.width]
    }

    /// The 16 stored link-rotation components of row `i`.
    pub fn link_row(&self, i: usize) -> &[f32] {
        &self.link_rotations[i * 16..(i + 1) * 16]
    }

    pub fn poses(&self) -> &[f32] {
        &self.poses
    }

    pub fn link_rotations(&self) -> &[f32] {
        &self.link_rotations
    }

    pub fn link_set(&self, i: usize) -> LinkRotationSet {
        let row: Vec<f64> = self.link_row(i).iter().map(|&v| f64::from(v)).collect();
        LinkRotationSet::from_flat(&row).expect("bank link rows are validated")
    }

    pub fn human_pose(&self, i: usize) -> Result<HumanPose> {
        let row: Vec<f64> = self.pose_row(i).iter().map(|&v| f64::from(v)).collect();
        HumanPose::from_flat(&self.chain, &row)
    }

    pub fn robot_pose(&self, i: usize) -> Result<RobotPose> {
        let row: Vec<f64> = self.pose_row(i).iter().map(|&v| f64::from(v)).collect();
        RobotPose::new_strict(&self.chain, row)
    }

    /// Assembles a bank from already-flattened rows, computing link rotations.
    pub fn from_rows(chain: &KinematicChain, domain: Domain, seed: u64, rows: &[Vec<f64>]) -> Result<Self> {
        chain.require_domain(domain)?;
        let width = chain.pose_width();
        let mut poses = Vec::with_capacity(rows.len() * width);
        let mut links = Vec::with_capacity(rows.len() * 16);
        for (i, row) in rows.iter().enumerate() {
            let (p, l) = encode_row(chain, domain, row).map_err(|e| Error::Validation(format!("row {i}: {e}")))?;
            poses.extend(p);
            links.extend(l);
        }
        Ok(PoseBank { domain, chain: chain.clone(), seed, width, poses, link_rotations: links })
    }

    /// Recomputes every row's pose validity and link rotations.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        (0..n).into_par_iter().try_for_each(|i| self.validate_row(i))
    }

    fn validate_row(&self, i: usize) -> Result<()> {
        let err = |msg: String| Error::Validation(format!("bank row {i}: {msg}"));
        let links = match self.domain {
            Domain::Human => {
                let p = self.human_pose(i).map_err(|e| err(e.to_string()))?;
                semantic_link_rotations(&self.chain, &p)?
            }
            Domain::Robot => {
                let p = self.robot_pose(i).map_err(|e| err(e.to_string()))?;
                semantic_link_rotations(&self.chain, &p)?
            }
        };
        for (k, (stored, fresh)) in self.link_row(i).iter().zip(links.to_flat()).enumerate() {
            if (f64::from(*stored) - fresh).abs() > LINK_TOLERANCE {
                return Err(err(format!("link component {k} is {stored}, recomputed {fresh}")));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let chain_json = self.chain.to_json().into_bytes();
        let mut out = Vec::with_capacity(HEADER_LEN + chain_json.len() + 4 * (self.poses.len() + self.link_rotations.len()));
        out.extend_from_slice(BANK_MAGIC);
        out.extend_from_slice(&BANK_VERSION.to_le_bytes());
        out.push(self.domain.code());
        out.extend_from_slice(&[0; 3]);
        out.extend_from_slice(&(self.chain.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&0u64.to_le_bytes());
        out.extend_from_slice(&(chain_json.len() as u32).to_le_bytes());
        out.resize(HEADER_LEN, 0);
        out.extend_from_slice(&chain_json);
        push_f32s(&mut out, &self.poses);
        push_f32s(&mut out, &self.link_rotations);
        let sum = crc(&out);
        out[CHECKSUM_AT..CHECKSUM_AT + 8].copy_from_slice(&sum.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let path_buf = path.to_path_buf();
        let kind = "pose bank";
        let truncated = |expected: u64| Error::Truncated { path: path_buf.clone(), found: bytes.len() as u64, expected };
        let malformed = |detail: String| Error::Malformed { path: path_buf.clone(), detail };
        if bytes.len() < 8 || &bytes[..8] != BANK_MAGIC {
            if bytes.len() < 8 && BANK_MAGIC.starts_with(bytes) {
                return Err(truncated(HEADER_LEN as u64));
            }
            return Err(Error::BadMagic { path: path_buf, kind });
        }
        if bytes.len() < HEADER_LEN {
            return Err(truncated(HEADER_LEN as u64));
        }
        let version = read_u32(bytes, 8);
        if version != BANK_VERSION {
            return Err(Error::Version { path: path_buf, kind, found: version, expected: BANK_VERSION });
        }
        let joints = read_u32(bytes, 16) as u64;
        let width = read_u32(bytes, 20) as u64;
        let count = read_u64(bytes, 24);
        let seed = read_u64(bytes, 32);
        let stored = read_u64(bytes, CHECKSUM_AT);
        let chain_len = read_u32(bytes, 48) as u64;
        let expected = count
            .checked_mul(width + 16)
            .and_then(|f| f.checked_mul(4))
            .and_then(|p| p.checked_add(HEADER_LEN as u64 + chain_len))
            .ok_or_else(|| malformed("header sizes overflow".into()))?;
        if (bytes.len() as u64) < expected {
            return Err(truncated(expected));
        }
        if bytes.len() as u64 > expected {
            return Err(malformed(format!("{} trailing bytes", bytes.len() as u64 - expected)));
        }
        let mut scratch = bytes.to_vec();
        scratch[CHECKSUM_AT..CHECKSUM_AT + 8].fill(0);
        let computed = crc(&scratch);
        if computed != stored {
            return Err(Error::Checksum { path: path_buf, stored, computed });
        }
        let domain = Domain::from_code(bytes[12]).ok_or_else(|| malformed(format!("unknown domain code {}", bytes[12])))?;
        let chain_end = HEADER_LEN + chain_len as usize;
        let chain_text = std::str::from_utf8(&bytes[HEADER_LEN..chain_end]).map_err(|e| malformed(e.to_string()))?;
        let chain = KinematicChain::from_json(chain_text).map_err(|e| malformed(format!("embedded chain: {e}")))?;
        if chain.len() as u64 != joints || chain.pose_width() as u64 != width || chain.domain() != Some(domain) {
            return Err(malformed("header disagrees with the embedded chain".into()));
        }
        let pose_end = chain_end + 4 * (count * width) as usize;
        let bank = PoseBank {
            domain,
            chain,
            seed,
            width: width as usize,
            poses: read_f32s(&bytes[chain_end..pose_end]),
            link_rotations: read_f32s(&bytes[pose_end..]),
        };
        Ok(bank)
    }
}

fn encode_row(chain: &KinematicChain, domain: Domain, row: &[f64]) -> Result<(Vec<f32>, [f32; 16])> {
    let stored: Vec<f32> = row.iter().map(|&v| v as f32).collect();
    // links are computed from the 32-bit values that will actually be stored
    let widened: Vec<f64> = stored.iter().map(|&v| f64::from(v)).collect();
    let links = match domain {
        Domain::Human => semantic_link_rotations(chain, &HumanPose::from_flat(chain, &widened)?)?,
        Domain::Robot => semantic_link_rotations(chain, &RobotPose::new_strict(chain, widened)?)?,
    };
    Ok((stored, links.to_flat().map(|v| v as f32)))
}

/// Samples `count` poses. Row `i` uses stream `i` of `seed`, so the result
/// is identical for any `workers` value.
pub fn build_pose_bank(chain: &KinematicChain, domain: Domain, count: usize, seed: u64, workers: usize) -> Result<PoseBank> {
    if count == 0 {
        return Err(Error::Validation("pose bank count must be at least 1".into()));
    }
    chain.require_domain(domain)?;
    let width = chain.pose_width();
    let make_row = |i: usize| -> Result<(Vec<f32>, [f32; 16])> {
        let mut rng = derive_rng(seed, i as u64);
        let row = match domain {
            Domain::Human => sample_human_pose(chain, &mut rng)?.to_flat(),
            Domain::Robot => sample_robot_pose(chain, &mut rng)?.joint_angles().to_vec(),
        };
        encode_row(chain, domain, &row)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Validation(format!("cannot start worker pool: {e}")))?;
    let rows: Vec<(Vec<f32>, [f32; 16])> = pool.install(|| (0..count).into_par_iter().map(make_row).collect::<Result<_>>())?;
    let mut poses = Vec::with_capacity(count * width);
    let mut links = Vec::with_capacity(count * 16);
    for (p, l) in rows {
        poses.extend(p);
        links.extend(l);
    }
    Ok(PoseBank { domain, chain: chain.clone(), seed, width, poses, link_rotations: links })
}

pub fn save_pose_bank(bank: &PoseBank, path: &Path) -> Result<()> {
    write_atomic(path, &bank.to_bytes())
}

/// Loads and fully validates a bank (format, checksum, every row).
pub fn load_pose_bank(path: &Path) -> Result<PoseBank> {
    let bytes = std::fs::read(path)?;
    let bank = PoseBank::from_bytes(&bytes, path)?;
    bank.validate()?;
    Ok(bank)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> KinematicChain {
        KinematicChain::builtin("toy-robot-8").unwrap()
    }

    #[test]
    fn single_row_matches_direct_sample() {
        let chain = toy();
        let bank = build_pose_bank(&chain, Domain::Robot, 1, 7, 1).unwrap();
        let direct = sample_robot_pose(&chain, &mut derive_rng(7, 0)).unwrap();
        let expected: Vec<f32> = direct.joint_angles().iter().map(|&a| a as f32).collect();
        assert_eq!(bank.pose_row(0), expected.as_slice());
    }

    #[test]
    fn worker_count_does_not_change_bytes() {
        let chain = KinematicChain::builtin("human-upper-14").unwrap();
        let a = build_pose_bank(&chain, Domain::Human, 300, 5, 1).unwrap();
        let b = build_pose_bank(&chain, Domain::Human, 300, 5, 8).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
    }

    #[test]
    fn rejects_zero_count_and_wrong_domain() {
        assert!(build_pose_bank(&toy(), Domain::Robot, 0, 1, 1).is_err());
        assert!(build_pose_bank(&toy(), Domain::Human, 10, 1, 1).is_err());
    }

    #[test]
    fn distinct_errors() {
        let bank = build_pose_bank(&toy(), Domain::Robot, 20, 3, 1).unwrap();
        let bytes = bank.to_bytes();
        let p = Path::new("mem.bank");
        assert_eq!(PoseBank::from_bytes(&bytes, p).unwrap(), bank);

        let mut corrupt = bytes.clone();
        let last = corrupt.len() - 5;
        corrupt[last] ^= 0x40;
        assert!(matches!(PoseBank::from_bytes(&corrupt, p), Err(Error::Checksum { .. })));

        let mut versioned = bytes.clone();
        versioned[8..12].copy_from_slice(&9u32.to_le_bytes());
        match PoseBank::from_bytes(&versioned, p) {
            Err(Error::Version { found: 9, expected: BANK_VERSION, .. }) => {}
            other => panic!("expected version error, got {other:?}"),
        }

        assert!(matches!(PoseBank::from_bytes(&bytes[..bytes.len() - 3], p), Err(Error::Truncated { .. })));
        assert!(matches!(PoseBank::from_bytes(b"NOTABANKxxxxxxxx", p), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn validate_catches_out_of_limit_row() {
        let chain = toy();
        let mut bank = build_pose_bank(&chain, Domain::Robot, 4, 3, 1).unwrap();
        bank.poses[1] = 100.0;
        assert!(bank.validate().is_err());
    }
}
