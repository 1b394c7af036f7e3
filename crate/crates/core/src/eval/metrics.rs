use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::KinematicChain;
use crate::data::{sample_human_pose, sample_robot_pose, MotionTrace};
use crate::error::{Error, Result};
use crate::eval::oracle::{oracle_batch, OracleConfig};
use crate::kinematics::{rotation_distance, semantic_link_rotations};
use crate::nn::Scalar;
use crate::pose::HumanPose;
use crate::rng::{derive_rng, subseed, Rng};
use crate::runtime::LatentCode;
use crate::train::mining::{mine_triplets_in, BankPair, BankRef, MiningConfig};
use crate::train::{RetargetModel, TrainConfig, ValidationSet};

/// Held-out human poses: pose `i` comes from stream `i` of a seed derived
/// from `seed`, so they are independent of any bank built from `seed`.
pub fn held_out_human_poses(chain_h: &KinematicChain, n: usize, seed: u64) -> Result<Vec<HumanPose>> {
    let base = subseed(seed, "held-out");
    (0..n).map(|i| sample_human_pose(chain_h, &mut derive_rng(base, i as u64))).collect()
}

/// `n` held-out human poses with oracle references.
pub fn build_validation_set(
    chain_h: &KinematicChain,
    chain_r: &KinematicChain,
    n: usize,
    seed: u64,
    oracle: &OracleConfig,
    workers: usize,
) -> Result<ValidationSet> {
    let human = held_out_human_poses(chain_h, n, seed)?;
    let refs = oracle_batch(chain_h, chain_r, &human, oracle, subseed(seed, "oracle"), workers)?;
    let reference_distance = refs.iter().map(|r| r.distance).collect();
    let reference = refs.into_iter().map(|r| r.pose).collect();
    Ok(ValidationSet { human, reference, reference_distance })
}

/// Mean per-joint absolute error of the robot autoencoding path on `n`
/// fresh robot poses.
pub fn held_out_reconstruction<T: Scalar>(model: &RetargetModel<T>, n: usize, seed: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InsufficientData("reconstruction needs at least one pose".into()));
    }
    let base = subseed(seed, "held-out-robot");
    let mut total = 0.0;
    for i in 0..n {
        let x = sample_robot_pose(&model.robot_chain, &mut derive_rng(base, i as u64))?;
        let y = model.decode_to_robot(&model.encode_robot(&x)?)?;
        total += x.joint_angles().iter().zip(y.joint_angles()).map(|(a, b)| (a - b).abs()).sum::<f64>() / x.len() as f64;
    }
    Ok(total / n as f64)
}

/// Mean over frames and joints of the squared angle difference.
pub fn eval_joint_mse(predicted: &MotionTrace, reference: &MotionTrace) -> Result<f64> {
    if predicted.chain_name != reference.chain_name {
        return Err(Error::ChainMismatch(format!(
            "traces are for '{}' and '{}'",
            predicted.chain_name, reference.chain_name
        )));
    }
    if predicted.len() != reference.len() {
        return Err(Error::ShapeMismatch(format!("trace lengths {} and {} differ", predicted.len(), reference.len())));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (i, (a, b)) in predicted.frames.iter().zip(&reference.frames).enumerate() {
        if a.len() != b.len() {
            return Err(Error::ShapeMismatch(format!("frame {i} widths {} and {} differ", a.len(), b.len())));
        }
        for (x, y) in a.iter().zip(b) {
            total += (x - y) * (x - y);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::InsufficientData("traces have no joint values".into()));
    }
    Ok(total / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRow {
    pub index: usize,
    pub retarget_dgr: f64,
    pub oracle_dgr: f64,
    pub random_dgr: f64,
    /// Mean squared joint error against the oracle.
    pub joint_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticReport {
    pub retarget_mean: f64,
    pub oracle_mean: f64,
    pub random_mean: f64,
    pub joint_mse: f64,
    pub rows: Vec<PoseRow>,
}

/// Link-rotation distance of the model's retargets, the oracle references
/// and uniformly random robot poses, per validation pose and on average.
pub fn eval_semantic<T: Scalar>(model: &RetargetModel<T>, set: &ValidationSet, seed: u64) -> Result<SemanticReport> {
    if set.human.is_empty() {
        return Err(Error::InsufficientData("semantic evaluation needs at least one pose".into()));
    }
    let (ch, cr) = (&model.human_chain, &model.robot_chain);
    let random_base = subseed(seed, "random-pose");
    let rows = set
        .human
        .par_iter()
        .enumerate()
        .map(|(i, h)| -> Result<PoseRow> {
            let target = semantic_link_rotations(ch, h)?;
            let out = model.retarget(h)?;
            let random = sample_robot_pose(cr, &mut derive_rng(random_base, i as u64))?;
            let d = |p| -> Result<f64> { Ok(rotation_distance(&target, &semantic_link_rotations(cr, p)?)) };
            let joint_mse = out
                .joint_angles()
                .iter()
                .zip(set.reference[i].joint_angles())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / out.len() as f64;
            Ok(PoseRow { index: i, retarget_dgr: d(&out)?, oracle_dgr: d(&set.reference[i])?, random_dgr: d(&random)?, joint_mse })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = rows.len() as f64;
    let mean = |f: fn(&PoseRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    Ok(SemanticReport {
        retarget_mean: mean(|r| r.retarget_dgr),
        oracle_mean: mean(|r| r.oracle_dgr),
        random_mean: mean(|r| r.random_dgr),
        joint_mse: mean(|r| r.joint_mse),
        rows,
    })
}

/// Fraction of freshly mined triplets whose latent distances order the
/// candidates the same way as the link-rotation distances do. Triplets are
/// mined as in training: from random pools of `TrainConfig::default().batch`
/// rows per domain.
pub fn eval_triplet_agreement(
    banks: BankPair<'_>,
    n_triplets: usize,
    seed: u64,
    embed: &dyn Fn(BankRef) -> Result<Vec<f64>>,
) -> Result<Agreement> {
    if n_triplets == 0 {
        return Err(Error::InsufficientData("agreement needs at least one triplet".into()));
    }
    let mut rng: Rng = derive_rng(subseed(seed, "agreement"), 0);
    let pool = TrainConfig::default().batch;
    let config = MiningConfig::default();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut counts = [[0usize; 2]; 2];
    let mut total = 0;
    while total < n_triplets {
        let human: Vec<usize> = (0..pool).map(|_| rng.gen_range(0..banks.human.len())).collect();
        let robot: Vec<usize> = (0..pool).map(|_| rng.gen_range(0..banks.robot.len())).collect();
        let count = pool.min(n_triplets - total);
        let triplets = mine_triplets_in(banks, &human, &robot, count, &config, &mut rng)?;
        let place = |r: BankRef| BankRef {
            domain: r.domain,
            index: match r.domain {
                crate::chain::Domain::Human => human[r.index],
                crate::chain::Domain::Robot => robot[r.index],
            },
        };
        for t in triplets.iter().take(n_triplets - total) {
            let (za, zp, zn) = (embed(place(t.anchor))?, embed(place(t.positive))?, embed(place(t.negative))?);
            let cross = usize::from(t.anchor.domain != t.positive.domain);
            counts[cross][0] += usize::from(dist(&za, &zp) < dist(&za, &zn));
            counts[cross][1] += 1;
            total += 1;
        }
    }
    let frac = |c: [usize; 2]| if c[1] == 0 { f64::NAN } else { c[0] as f64 / c[1] as f64 };
    Ok(Agreement {
        overall: frac([counts[0][0] + counts[1][0], total]),
        cross_domain: frac(counts[1]),
        same_domain: frac(counts[0]),
        triplets: total,
    })
}

/// Triplet agreement overall and split by whether the candidates come from
/// the anchor's domain. A split is `NaN` when it has no triplets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub overall: f64,
    pub cross_domain: f64,
    pub same_domain: f64,
    pub triplets: usize,
}

/// [`eval_triplet_agreement`] using the model's two encoders.
pub fn model_triplet_agreement<T: Scalar>(model: &RetargetModel<T>, banks: BankPair<'_>, n_triplets: usize, seed: u64) -> Result<Agreement> {
    let embed = |r: BankRef| -> Result<Vec<f64>> {
        let bank = banks.bank(r.domain);
        let code: LatentCode = match r.domain {
            crate::chain::Domain::Human => model.encode_human(&bank.human_pose(r.index)?)?,
            crate::chain::Domain::Robot => model.encode_robot(&bank.robot_pose(r.index)?)?,
        };
        Ok(code.values)
    };
    eval_triplet_agreement(banks, n_triplets, seed, &embed)
}
