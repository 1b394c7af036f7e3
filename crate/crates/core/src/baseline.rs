//! Supervised stand-in baseline: human poses paired with their nearest robot
//! bank row by link-rotation distance, then direct regression.

use ndarray::{Array2, Axis};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use crate::chain::Domain;
use crate::data::PoseBank;
use crate::error::{Error, Result};
use crate::io::{crc, read_u32, read_u64, write_atomic};
use crate::kinematics::rotation_distance_flat;
use crate::nn::{adam_step, AdamConfig, AdamState, Scalar};
use crate::rng::{derive_rng, subseed};
use crate::train::trainer::{gather_rows, ValidationSet};
use crate::train::RetargetModel;

pub const PAIRS_MAGIC: &[u8; 8] = b"RTGTPAIR";
pub const PAIRS_VERSION: u32 = 1;
const HEADER: usize = 32;
const CHECKSUM_AT: usize = 16;
const KIND: &str = "paired dataset";
/// Stored distances must match recomputation this closely.
pub const PAIR_DISTANCE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedMeta {
    pub human_chain: String,
    pub robot_chain: String,
    pub human_bank_len: usize,
    pub robot_bank_len: usize,
    pub human_seed: u64,
    pub robot_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedDataset {
    pub meta: PairedMeta,
    /// (human bank row, robot bank row)
    pub pairs: Vec<(u32, u32)>,
    pub distances: Vec<f64>,
}

impl PairedDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn check_banks(&self, bank_h: &PoseBank, bank_r: &PoseBank) -> Result<()> {
        let m = &self.meta;
        if m.human_chain != bank_h.chain_name() || m.robot_chain != bank_r.chain_name() {
            return Err(Error::ChainMismatch(format!(
                "pairs were built from '{}'/'{}', banks are '{}'/'{}'",
                m.human_chain,
                m.robot_chain,
                bank_h.chain_name(),
                bank_r.chain_name()
            )));
        }
        if m.human_bank_len != bank_h.len() || m.robot_bank_len != bank_r.len() || m.human_seed != bank_h.seed() || m.robot_seed != bank_r.seed() {
            return Err(Error::Validation("pairs were built from different banks".into()));
        }
        Ok(())
    }

    /// Checks every index and stored distance against the banks.
    pub fn validate(&self, bank_h: &PoseBank, bank_r: &PoseBank) -> Result<()> {
        self.check_banks(bank_h, bank_r)?;
        if self.pairs.len() != self.distances.len() {
            return Err(Error::Validation("pair and distance counts differ".into()));
        }
        for (i, (&(h, r), &d)) in self.pairs.iter().zip(&self.distances).enumerate() {
            let (h, r) = (h as usize, r as usize);
            if h >= bank_h.len() || r >= bank_r.len() {
                return Err(Error::Validation(format!("pair {i} indexes past the banks")));
            }
            let again = rotation_distance_flat(bank_h.link_row(h), bank_r.link_row(r));
            if !((again - d).abs() <= PAIR_DISTANCE_TOLERANCE) {
                return Err(Error::Validation(format!("pair {i}: stored distance {d} but recomputed {again}")));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let json = serde_json::to_vec(&self.meta).expect("metadata serializes");
        let mut out = Vec::with_capacity(HEADER + json.len() + 8 + self.pairs.len() * 16);
        out.extend_from_slice(PAIRS_MAGIC);
        out.extend_from_slice(&PAIRS_VERSION.to_le_bytes());
        out.extend_from_slice(&[0; 4]);
        out.extend_from_slice(&[0; 8]);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&(self.pairs.len() as u64).to_le_bytes());
        for &(h, r) in &self.pairs {
            out.extend_from_slice(&h.to_le_bytes());
            out.extend_from_slice(&r.to_le_bytes());
        }
        for d in &self.distances {
            out.extend_from_slice(&d.to_le_bytes());
        }
        let sum = crc(&out);
        out[CHECKSUM_AT..CHECKSUM_AT + 8].copy_from_slice(&sum.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let p = path.to_path_buf();
        if bytes.len() >= 8 && &bytes[..8] != PAIRS_MAGIC {
            return Err(Error::BadMagic { path: p, kind: KIND.into() });
        }
        if bytes.len() < HEADER {
            return Err(Error::Truncated { path: p, found: bytes.len() as u64, expected: HEADER as u64 });
        }
        let found = read_u32(bytes, 8);
        if found != PAIRS_VERSION {
            return Err(Error::Version { path: p, kind: KIND.into(), found, expected: PAIRS_VERSION });
        }
        let malformed = |detail: &str| Error::Malformed { path: path.to_path_buf(), detail: detail.into() };
        let json_len = read_u64(bytes, 24) as usize;
        let count_at = HEADER.checked_add(json_len).ok_or_else(|| malformed("JSON length overflows"))?;
        if bytes.len() < count_at + 8 {
            return Err(Error::Truncated { path: p, found: bytes.len() as u64, expected: (count_at + 8) as u64 });
        }
        let count = read_u64(bytes, count_at) as usize;
        let expected = count.checked_mul(16).and_then(|n| n.checked_add(count_at + 8)).ok_or_else(|| malformed("pair count overflows"))?;
        if bytes.len() < expected {
            return Err(Error::Truncated { path: p, found: bytes.len() as u64, expected: expected as u64 });
        }
        if bytes.len() > expected {
            return Err(malformed("trailing bytes after distances"));
        }
        let stored = read_u64(bytes, CHECKSUM_AT);
        let mut zeroed = bytes.to_vec();
        zeroed[CHECKSUM_AT..CHECKSUM_AT + 8].fill(0);
        let computed = crc(&zeroed);
        if stored != computed {
            return Err(Error::Checksum { path: p, stored, computed });
        }
        let meta: PairedMeta = serde_json::from_slice(&bytes[HEADER..count_at]).map_err(|e| malformed(&format!("metadata: {e}")))?;
        let pairs_at = count_at + 8;
        let pairs = (0..count).map(|i| (read_u32(bytes, pairs_at + 8 * i), read_u32(bytes, pairs_at + 8 * i + 4))).collect();
        let dist_at = pairs_at + 8 * count;
        let distances = (0..count).map(|i| f64::from_bits(read_u64(bytes, dist_at + 8 * i))).collect();
        Ok(PairedDataset { meta, pairs, distances })
    }
}

pub fn save_paired_dataset(pairs: &PairedDataset, path: &Path) -> Result<()> {
    write_atomic(path, &pairs.to_bytes())
}

pub fn load_paired_dataset(path: &Path) -> Result<PairedDataset> {
    PairedDataset::from_bytes(&std::fs::read(path)?, path)
}

/// Robot bank row closest to `links`; ties go to the lowest index.
pub fn nearest_robot_row(bank_r: &PoseBank, links: &[f32]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, row) in bank_r.link_rotations().chunks_exact(16).enumerate() {
        let d = rotation_distance_flat(links, row);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Pairs human rows `0..count` (cycling if `count` exceeds the bank) with
/// their nearest robot rows by exhaustive scan.
pub fn generate_pairs(bank_h: &PoseBank, bank_r: &PoseBank, count: usize, workers: usize) -> Result<PairedDataset> {
    if bank_h.domain() != Domain::Human || bank_r.domain() != Domain::Robot {
        return Err(Error::Validation("expected one human bank and one robot bank".into()));
    }
    if bank_h.is_empty() || bank_r.is_empty() {
        return Err(Error::InsufficientData("pair generation needs non-empty banks".into()));
    }
    if bank_h.len() > u32::MAX as usize || bank_r.len() > u32::MAX as usize {
        return Err(Error::Validation("banks too large for 32-bit pair indices".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Validation(format!("cannot start worker pool: {e}")))?;
    let found: Vec<(u32, u32, f64)> = pool.install(|| {
        (0..count)
            .into_par_iter()
            .map(|i| {
                let h = i % bank_h.len();
                let (r, d) = nearest_robot_row(bank_r, bank_h.link_row(h));
                (h as u32, r as u32, d)
            })
            .collect()
    });
    Ok(PairedDataset {
        meta: PairedMeta {
            human_chain: bank_h.chain_name().to_string(),
            robot_chain: bank_r.chain_name().to_string(),
            human_bank_len: bank_h.len(),
            robot_bank_len: bank_r.len(),
            human_seed: bank_h.seed(),
            robot_seed: bank_r.seed(),
        },
        pairs: found.iter().map(|&(h, r, _)| (h, r)).collect(),
        distances: found.iter().map(|&(_, _, d)| d).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig { lr: 0.001, batch: 256, epochs: 20, steps_per_epoch: 250, seed: 42 }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Validation(format!("lr must be positive, got {}", self.lr)));
        }
        if self.batch == 0 || self.steps_per_epoch == 0 {
            return Err(Error::Validation("batch and steps_per_epoch must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineEpoch {
    pub epoch: usize,
    /// Mean over the epoch of the per-pose L1 (summed over joints).
    pub l1: f64,
    pub val_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BaselineLog {
    pub epochs: Vec<BaselineEpoch>,
}

impl BaselineLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,l1,val_mse\n");
        for e in &self.epochs {
            let _ = writeln!(out, "{},{},{}", e.epoch, e.l1, e.val_mse);
        }
        out
    }
}

/// Fresh baseline network: the human encoder stacked on the decoder. The
/// robot encoder is present for a uniform model type but never trained.
pub fn baseline_model<T: Scalar>(bank_h: &PoseBank, bank_r: &PoseBank, arch: &crate::train::ModelArch, seed: u64) -> Result<RetargetModel<T>> {
    RetargetModel::new(bank_h.chain(), bank_r.chain(), arch, subseed(seed, "baseline"))
}

/// L1 loss of `model` on the given pairs and its gradients for the human
/// encoder and the decoder.
fn baseline_step<T: Scalar>(
    model: &RetargetModel<T>,
    x: &Array2<T>,
    y: &Array2<T>,
) -> Result<(f64, crate::nn::GradientSet<T>, crate::nn::GradientSet<T>)> {
    let n = x.nrows();
    let (z, cache_h) = model.encoder_h.forward(x.view())?;
    let (y_hat, cache_d) = model.decoder.forward(z.view())?;
    let diff = y - &y_hat;
    let loss = diff.iter().map(|v| v.as_f64().abs()).sum::<f64>() / n as f64;
    let scale = T::cast_from(1.0 / n as f64);
    let upstream = diff.mapv(|v| {
        if v > T::zero() {
            -scale
        } else if v < T::zero() {
            scale
        } else {
            T::zero()
        }
    });
    let mut g_d = model.decoder.backward(&cache_d, upstream.view(), true)?;
    let dz = g_d.input.take().expect("input gradient requested");
    let g_h = model.encoder_h.backward(&cache_h, dz.view(), false)?;
    Ok((loss, g_h, g_d))
}

/// Supervised L1 regression of robot angles from human poses.
pub fn train_baseline<T: Scalar>(
    model: &mut RetargetModel<T>,
    pairs: &PairedDataset,
    bank_h: &PoseBank,
    bank_r: &PoseBank,
    validation: Option<&ValidationSet>,
    config: &BaselineConfig,
    on_epoch: &mut dyn FnMut(&BaselineEpoch),
) -> Result<BaselineLog> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::InsufficientData("baseline training needs at least one pair".into()));
    }
    pairs.check_banks(bank_h, bank_r)?;
    let mut log = BaselineLog::default();
    let adam = AdamConfig { lr: config.lr, ..AdamConfig::default() };
    let mut opt_h = AdamState::new(&model.encoder_h, adam);
    let mut opt_d = AdamState::new(&model.decoder, adam);
    let mut rng = derive_rng(subseed(config.seed, "baseline-train"), 0);
    for epoch in 1..=config.epochs {
        let mut sum = 0.0;
        for step in 0..config.steps_per_epoch {
            let picks: Vec<(u32, u32)> = (0..config.batch).map(|_| pairs.pairs[rng.gen_range(0..pairs.len())]).collect();
            let x: Array2<T> = gather_rows(bank_h, picks.iter().map(|p| p.0 as usize));
            let y: Array2<T> = gather_rows(bank_r, picks.iter().map(|p| p.1 as usize));
            let (loss, g_h, g_d) = baseline_step(model, &x, &y)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, step, detail: format!("baseline loss {loss}") });
            }
            let diverged = |e: Error| Error::Divergence { epoch, step, detail: e.to_string() };
            adam_step(&mut model.encoder_h, &mut opt_h, &g_h).map_err(diverged)?;
            adam_step(&mut model.decoder, &mut opt_d, &g_d).map_err(diverged)?;
            sum += loss;
        }
        let val_mse = match validation {
            Some(v) => v.joint_mse(model)?,
            None => f64::NAN,
        };
        let e = BaselineEpoch { epoch, l1: sum / config.steps_per_epoch as f64, val_mse };
        on_epoch(&e);
        log.epochs.push(e);
    }
    Ok(log)
}

/// Mean per-pose L1 of the baseline over all pairs.
pub fn baseline_l1<T: Scalar>(model: &RetargetModel<T>, pairs: &PairedDataset, bank_h: &PoseBank, bank_r: &PoseBank) -> Result<f64> {
    let x: Array2<T> = gather_rows(bank_h, pairs.pairs.iter().map(|p| p.0 as usize));
    let y: Array2<T> = gather_rows(bank_r, pairs.pairs.iter().map(|p| p.1 as usize));
    let y_hat = model.decoder.predict(model.encoder_h.predict(x.view())?.view())?;
    let total: f64 = (&y - &y_hat).iter().map(|v| v.as_f64().abs()).sum();
    Ok(total / x.len_of(Axis(0)) as f64)
}
