//! `.rtm` model checkpoints.
//!
//! Layout (little-endian):
//!
//! | bytes   | field                                   |
//! |---------|-----------------------------------------|
//! | 0..8    | magic `RTGTMODL`                        |
//! | 8..12   | format version                          |
//! | 12..16  | reserved, zero                          |
//! | 16..24  | CRC-32 of the file with this field zero |
//! | 24..32  | length of the JSON section              |
//! | 32..    | JSON section, then f32 parameters       |
//!
//! The JSON section holds both chains, the architecture and the training
//! config. Parameters follow network by network (human encoder, robot
//! encoder, decoder), each layer as weights then bias.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::chain::KinematicChain;
use crate::error::{Error, Result};
use crate::io::{crc, push_f32s, read_f32s, read_u32, read_u64, write_atomic};
use crate::nn::Parameters;
use crate::train::model::{ModelArch, RetargetModel};
use crate::train::trainer::TrainConfig;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"RTGTMODL";
pub const CHECKPOINT_VERSION: u32 = 1;
const HEADER: usize = 32;
const CHECKSUM_AT: usize = 16;
const KIND: &str = "checkpoint";

#[derive(Serialize, Deserialize)]
struct Meta {
    human_chain: String,
    robot_chain: String,
    arch: ModelArch,
    param_count: usize,
    #[serde(default)]
    kind: ModelKind,
    config: Option<serde_json::Value>,
}

/// How a checkpoint's networks were trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Unsupervised,
    /// Supervised on nearest-neighbour pairs; only the human encoder and
    /// decoder are trained.
    Baseline,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: RetargetModel<f32>,
    pub kind: ModelKind,
    /// Echo of the training configuration.
    pub config: Option<serde_json::Value>,
}

impl Checkpoint {
    pub fn train_config(&self) -> Option<TrainConfig> {
        self.config.as_ref().and_then(|v| serde_json::from_value(v.clone()).ok())
    }
}

pub fn checkpoint_bytes<C: Serialize>(model: &RetargetModel<f32>, kind: ModelKind, config: Option<&C>) -> Result<Vec<u8>> {
    let meta = Meta {
        human_chain: model.human_chain.to_json(),
        robot_chain: model.robot_chain.to_json(),
        arch: model.arch(),
        param_count: model.num_params(),
        kind,
        config: config.map(serde_json::to_value).transpose()?,
    };
    let json = serde_json::to_vec(&meta)?;
    let params: Vec<f32> = model.flat_params().into_iter().map(|v| v as f32).collect();
    let mut out = Vec::with_capacity(HEADER + json.len() + params.len() * 4);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&[0; 4]);
    out.extend_from_slice(&[0; 8]);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    push_f32s(&mut out, &params);
    let sum = crc(&out);
    out[CHECKSUM_AT..CHECKSUM_AT + 8].copy_from_slice(&sum.to_le_bytes());
    Ok(out)
}

pub fn save_checkpoint<C: Serialize>(model: &RetargetModel<f32>, kind: ModelKind, config: Option<&C>, path: &Path) -> Result<()> {
    write_atomic(path, &checkpoint_bytes(model, kind, config)?)
}

pub fn checkpoint_from_bytes(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let path_s = path.to_path_buf();
    if bytes.len() >= 8 && &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic { path: path_s, kind: KIND.into() });
    }
    if bytes.len() >= 12 {
        let found = read_u32(bytes, 8);
        if found != CHECKPOINT_VERSION {
            return Err(Error::Version { path: path_s, kind: KIND.into(), found, expected: CHECKPOINT_VERSION });
        }
    }
    if bytes.len() < HEADER {
        let stored = if bytes.len() >= CHECKSUM_AT + 8 { read_u64(bytes, CHECKSUM_AT) } else { 0 };
        return Err(Error::Checksum { path: path_s, stored, computed: crc(bytes) });
    }
    let stored = read_u64(bytes, CHECKSUM_AT);
    let mut zeroed = bytes.to_vec();
    zeroed[CHECKSUM_AT..CHECKSUM_AT + 8].fill(0);
    let computed = crc(&zeroed);
    if stored != computed {
        return Err(Error::Checksum { path: path_s, stored, computed });
    }
    let malformed = |detail: String| Error::Malformed { path: path.to_path_buf(), detail };
    let json_len = usize::try_from(read_u64(bytes, 24)).map_err(|_| malformed("JSON length overflows".into()))?;
    let json_end = HEADER.checked_add(json_len).filter(|&e| e <= bytes.len()).ok_or_else(|| malformed("JSON section runs past end".into()))?;
    let meta: Meta = serde_json::from_slice(&bytes[HEADER..json_end]).map_err(|e| malformed(format!("metadata: {e}")))?;
    let human = KinematicChain::from_json(&meta.human_chain).map_err(|e| malformed(format!("human chain: {e}")))?;
    let robot = KinematicChain::from_json(&meta.robot_chain).map_err(|e| malformed(format!("robot chain: {e}")))?;
    let mut model = RetargetModel::<f32>::new(&human, &robot, &meta.arch, 0)?;
    if model.num_params() != meta.param_count || bytes.len() - json_end != meta.param_count * 4 {
        return Err(malformed(format!(
            "expected {} parameters, file holds {} bytes of them",
            model.num_params(),
            bytes.len() - json_end
        )));
    }
    let params: Vec<f64> = read_f32s(&bytes[json_end..]).into_iter().map(f64::from).collect();
    model.set_flat_params(&params);
    Ok(Checkpoint { model, kind: meta.kind, config: meta.config })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    checkpoint_from_bytes(&std::fs::read(path)?, path)
}

/// Loads a checkpoint and checks it was trained for the given chains.
pub fn load_checkpoint_for(path: &Path, human: &KinematicChain, robot: &KinematicChain) -> Result<Checkpoint> {
    let ck = load_checkpoint(path)?;
    check_chains(&ck.model, human, robot)?;
    Ok(ck)
}

pub fn check_chains(model: &RetargetModel<f32>, human: &KinematicChain, robot: &KinematicChain) -> Result<()> {
    for (have, want, what) in [(&model.human_chain, human, "human"), (&model.robot_chain, robot, "robot")] {
        if have.pose_width() != want.pose_width() {
            return Err(Error::ShapeMismatch(format!(
                "checkpoint {what} chain '{}' has pose width {}, '{}' needs {}",
                have.name(),
                have.pose_width(),
                want.name(),
                want.pose_width()
            )));
        }
        if have != want {
            return Err(Error::ChainMismatch(format!(
                "checkpoint was trained for {what} chain '{}', got '{}'",
                have.name(),
                want.name()
            )));
        }
    }
    Ok(())
}
