use ndarray::Array2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::data::PoseBank;
use crate::error::{Error, Result};
use crate::nn::{adam_step, AdamConfig, AdamState, Scalar};
use crate::pose::{HumanPose, RobotPose};
use crate::rng::{derive_rng, subseed};
use crate::train::loss::{total_loss, BatchRef, BatchTriplet, LossBreakdown, LossWeights, TrainBatch};
use crate::train::mining::{mine_triplets_in, BankPair, BankRef, MiningConfig};
use crate::train::model::RetargetModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch: usize,
    pub alpha: f64,
    pub lambda_triplet: f64,
    pub lambda_rec: f64,
    pub lambda_ltc: f64,
    pub epochs: usize,
    /// Optimizer steps per epoch.
    pub steps_per_epoch: usize,
    pub seed: u64,
    pub cross_domain_fraction: f64,
    pub separation_delta: f64,
    /// See [`MiningConfig::local_fraction`].
    #[serde(default = "default_local_fraction")]
    pub local_fraction: f64,
    #[serde(default = "default_local_k")]
    pub local_k: usize,
}

fn default_local_fraction() -> f64 {
    MiningConfig::default().local_fraction
}

fn default_local_k() -> usize {
    MiningConfig::default().local_k
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.001,
            batch: 256,
            alpha: 0.05,
            lambda_triplet: 10.0,
            lambda_rec: 5.0,
            lambda_ltc: 1.0,
            epochs: 20,
            steps_per_epoch: 900,
            seed: 42,
            cross_domain_fraction: 0.5,
            separation_delta: 0.1,
            local_fraction: 1.0,
            local_k: default_local_k(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [("lr", self.lr), ("alpha", self.alpha), ("separation_delta", self.separation_delta)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("{name} must be positive, got {v}")));
            }
        }
        let weights = [("lambda_triplet", self.lambda_triplet), ("lambda_rec", self.lambda_rec), ("lambda_ltc", self.lambda_ltc)];
        for (name, v) in weights {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Validation(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.batch == 0 || self.steps_per_epoch == 0 {
            return Err(Error::Validation("batch and steps_per_epoch must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.local_fraction) || self.local_k < 2 {
            return Err(Error::Validation("local_fraction must lie in [0, 1] and local_k be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.cross_domain_fraction) {
            return Err(Error::Validation(format!(
                "cross_domain_fraction must lie in [0, 1], got {}",
                self.cross_domain_fraction
            )));
        }
        Ok(())
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights { alpha: self.alpha, triplet: self.lambda_triplet, rec: self.lambda_rec, ltc: self.lambda_ltc }
    }

    pub fn mining(&self) -> MiningConfig {
        MiningConfig {
            cross_domain_fraction: self.cross_domain_fraction,
            separation_delta: self.separation_delta,
            local_fraction: self.local_fraction,
            local_k: self.local_k,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, ..AdamConfig::default() }
    }
}

/// Held-out human poses with reference robot poses.
#[derive(Debug, Clone)]
pub struct ValidationSet {
    pub human: Vec<HumanPose>,
    pub reference: Vec<RobotPose>,
    /// Link-rotation distance achieved by each reference.
    pub reference_distance: Vec<f64>,
}

impl ValidationSet {
    /// Mean over poses and joints of the squared angle error of `model`'s
    /// retargets against the references.
    pub fn joint_mse<T: Scalar>(&self, model: &RetargetModel<T>) -> Result<f64> {
        let predicted = model.retarget_batch(&self.human)?;
        let mut total = 0.0;
        let mut count = 0usize;
        for (p, r) in predicted.iter().zip(&self.reference) {
            for (a, b) in p.joint_angles().iter().zip(r.joint_angles()) {
                total += (a - b) * (a - b);
                count += 1;
            }
        }
        Ok(if count == 0 { 0.0 } else { total / count as f64 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub l_triplet: f64,
    pub l_rec: f64,
    pub l_ltc: f64,
    pub total: f64,
    /// `NaN` when no validation set was supplied.
    pub val_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsLog {
    /// Loss of the first batch before any update.
    pub initial: Option<LossBreakdown>,
    pub epochs: Vec<EpochMetrics>,
}

impl MetricsLog {
    pub const CSV_HEADER: &'static str = "epoch,l_triplet,l_rec,l_ltc,total,val_mse";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for m in &self.epochs {
            let _ = writeln!(out, "{},{},{},{},{},{}", m.epoch, m.l_triplet, m.l_rec, m.l_ltc, m.total, m.val_mse);
        }
        out
    }
}

/// Copies the listed bank rows into a batch-major matrix.
pub fn gather_rows<T: Scalar>(bank: &PoseBank, rows: impl ExactSizeIterator<Item = usize>) -> Array2<T> {
    let width = bank.width();
    let n = rows.len();
    let mut data = Vec::with_capacity(n * width);
    for i in rows {
        data.extend(bank.pose_row(i).iter().map(|&v| T::cast_from(f64::from(v))));
    }
    Array2::from_shape_vec((n, width), data).expect("row widths are uniform")
}

/// Draws the batch for one step: `batch` human and `batch` robot rows, and
/// `batch` triplets mined among those rows.
pub fn sample_batch<T: Scalar>(banks: BankPair<'_>, config: &TrainConfig, rng: &mut crate::rng::Rng) -> Result<TrainBatch<T>> {
    let human_rows: Vec<usize> = (0..config.batch).map(|_| rng.gen_range(0..banks.human.len())).collect();
    let robot_rows: Vec<usize> = (0..config.batch).map(|_| rng.gen_range(0..banks.robot.len())).collect();
    let triplets = mine_triplets_in(banks, &human_rows, &robot_rows, config.batch, &config.mining(), rng)?;
    let place = |r: BankRef| BatchRef { domain: r.domain, row: r.index };
    let triplets = triplets
        .iter()
        .map(|t| {
            assert!(t.d_pos + config.separation_delta <= t.d_neg, "mined triplet violates the separation margin");
            BatchTriplet { anchor: place(t.anchor), positive: place(t.positive), negative: place(t.negative) }
        })
        .collect();
    Ok(TrainBatch {
        human: gather_rows(banks.human, human_rows.into_iter()),
        robot: gather_rows(banks.robot, robot_rows.into_iter()),
        triplets,
    })
}

/// Optimizer state for the three networks.
pub struct Optimizer<T> {
    encoder_h: AdamState<T>,
    encoder_r: AdamState<T>,
    decoder: AdamState<T>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(model: &RetargetModel<T>, config: AdamConfig) -> Self {
        Optimizer {
            encoder_h: AdamState::new(&model.encoder_h, config),
            encoder_r: AdamState::new(&model.encoder_r, config),
            decoder: AdamState::new(&model.decoder, config),
        }
    }
}

/// Runs `epochs x steps_per_epoch` updates; the metrics log depends only on
/// the model initialization, banks, validation set and config.
pub fn train<T: Scalar>(
    model: &mut RetargetModel<T>,
    banks: BankPair<'_>,
    validation: Option<&ValidationSet>,
    config: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochMetrics),
) -> Result<MetricsLog> {
    config.validate()?;
    if banks.human.chain_name() != model.human_chain.name() || banks.robot.chain_name() != model.robot_chain.name() {
        return Err(Error::ChainMismatch(format!(
            "banks are for '{}'/'{}', model for '{}'/'{}'",
            banks.human.chain_name(),
            banks.robot.chain_name(),
            model.human_chain.name(),
            model.robot_chain.name()
        )));
    }
    let mut log = MetricsLog::default();
    if config.epochs == 0 {
        return Ok(log);
    }
    let weights = config.weights();
    let mut opt = Optimizer::new(model, config.adam());
    let mut rng = derive_rng(subseed(config.seed, "train"), 0);
    for epoch in 1..=config.epochs {
        let mut sums = LossBreakdown::default();
        for step in 0..config.steps_per_epoch {
            let batch = sample_batch::<T>(banks, config, &mut rng)?;
            let (loss, grads) = total_loss(&batch, model, &weights, true)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, step, detail: format!("loss {loss:?}") });
            }
            if log.initial.is_none() {
                log.initial = Some(loss);
            }
            let g = grads.expect("gradients requested");
            let diverged = |e: Error| Error::Divergence { epoch, step, detail: e.to_string() };
            adam_step(&mut model.encoder_h, &mut opt.encoder_h, &g.encoder_h).map_err(diverged)?;
            adam_step(&mut model.encoder_r, &mut opt.encoder_r, &g.encoder_r).map_err(diverged)?;
            adam_step(&mut model.decoder, &mut opt.decoder, &g.decoder).map_err(diverged)?;
            sums.triplet += loss.triplet;
            sums.rec += loss.rec;
            sums.ltc += loss.ltc;
            sums.total += loss.total;
        }
        let n = config.steps_per_epoch as f64;
        let val_mse = match validation {
            Some(v) => v.joint_mse(model)?,
            None => f64::NAN,
        };
        let metrics = EpochMetrics {
            epoch,
            l_triplet: sums.triplet / n,
            l_rec: sums.rec / n,
            l_ltc: sums.ltc / n,
            total: sums.total / n,
            val_mse,
        };
        on_epoch(&metrics);
        log.epochs.push(metrics);
    }
    Ok(log)
}
