//! Triplet selection by link-rotation distance.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::chain::Domain;
use crate::data::PoseBank;
use crate::error::{Error, Result};
use crate::kinematics::rotation_distance_flat;
use crate::rng::Rng;

/// Redraws allowed for a candidate pair whose distances are too close.
pub const MAX_REDRAWS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BankRef {
    pub domain: Domain,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub anchor: BankRef,
    pub positive: BankRef,
    pub negative: BankRef,
    pub d_pos: f64,
    pub d_neg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiningConfig {
    /// Minimum share of triplets whose candidates come from the other domain.
    pub cross_domain_fraction: f64,
    /// Candidate pairs closer than this in distance are redrawn.
    pub separation_delta: f64,
    /// Share of triplets whose candidates are drawn from the `local_k`
    /// members nearest the anchor instead of uniformly.
    #[serde(default = "default_local_fraction")]
    pub local_fraction: f64,
    #[serde(default = "default_local_k")]
    pub local_k: usize,
}

fn default_local_fraction() -> f64 {
    1.0
}

fn default_local_k() -> usize {
    8
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig { cross_domain_fraction: 0.5, separation_delta: 0.1, local_fraction: default_local_fraction(), local_k: default_local_k() }
    }
}

/// Both banks, addressed by domain.
#[derive(Clone, Copy)]
pub struct BankPair<'a> {
    pub human: &'a PoseBank,
    pub robot: &'a PoseBank,
}

impl<'a> BankPair<'a> {
    pub fn new(human: &'a PoseBank, robot: &'a PoseBank) -> Result<Self> {
        if human.domain() != Domain::Human || robot.domain() != Domain::Robot {
            return Err(Error::Validation("expected one human bank and one robot bank".into()));
        }
        Ok(BankPair { human, robot })
    }

    pub fn bank(&self, domain: Domain) -> &'a PoseBank {
        match domain {
            Domain::Human => self.human,
            Domain::Robot => self.robot,
        }
    }

    pub fn links(&self, r: BankRef) -> &'a [f32] {
        self.bank(r.domain).link_row(r.index)
    }

    pub fn distance(&self, a: BankRef, b: BankRef) -> f64 {
        rotation_distance_flat(self.links(a), self.links(b))
    }
}

/// Draws up to `batch_size` triplets from the whole banks. The first
/// `ceil(cross_domain_fraction * batch_size)` take both candidates from the
/// domain opposite the anchor, the rest from the anchor's own domain.
/// Anchor domains alternate at random. Near-tied candidate pairs are redrawn
/// up to [`MAX_REDRAWS`] times and then dropped.
pub fn mine_triplets(banks: BankPair<'_>, batch_size: usize, config: &MiningConfig, rng: &mut Rng) -> Result<Vec<Triplet>> {
    let len = |d: Domain| banks.bank(d).len();
    mine_with(batch_size, config, rng, len, |a, b| banks.distance(a, b))
}

/// As [`mine_triplets`], but members are drawn from the given bank rows and
/// each returned `index` is a position in `human_rows` or `robot_rows`.
pub fn mine_triplets_in(
    banks: BankPair<'_>,
    human_rows: &[usize],
    robot_rows: &[usize],
    count: usize,
    config: &MiningConfig,
    rng: &mut Rng,
) -> Result<Vec<Triplet>> {
    let rows = |d: Domain| match d {
        Domain::Human => human_rows,
        Domain::Robot => robot_rows,
    };
    let bank_ref = |r: BankRef| BankRef { domain: r.domain, index: rows(r.domain)[r.index] };
    mine_with(count, config, rng, |d| rows(d).len(), |a, b| banks.distance(bank_ref(a), bank_ref(b)))
}

fn mine_with(
    count: usize,
    config: &MiningConfig,
    rng: &mut Rng,
    len: impl Fn(Domain) -> usize,
    distance: impl Fn(BankRef, BankRef) -> f64,
) -> Result<Vec<Triplet>> {
    if len(Domain::Human) == 0 || len(Domain::Robot) == 0 {
        return Err(Error::InsufficientData("triplet mining needs non-empty human and robot banks".into()));
    }
    let n_cross = (config.cross_domain_fraction.clamp(0.0, 1.0) * count as f64).ceil() as usize;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let anchor_domain = if rng.gen_bool(0.5) { Domain::Human } else { Domain::Robot };
        let cand_domain = if i < n_cross { anchor_domain.other() } else { anchor_domain };
        let anchor = BankRef { domain: anchor_domain, index: rng.gen_range(0..len(anchor_domain)) };
        let cand_len = len(cand_domain);
        let local = config.local_fraction > 0.0 && rng.gen_bool(config.local_fraction.min(1.0));
        let near: Vec<usize> = if local {
            let mut order: Vec<(f64, usize)> =
                (0..cand_len).map(|c| (distance(anchor, BankRef { domain: cand_domain, index: c }), c)).collect();
            let k = config.local_k.clamp(2, cand_len.max(2)).min(cand_len);
            order.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            order.truncate(k);
            order.sort_by(|a, b| a.1.cmp(&b.1));
            order.into_iter().map(|(_, c)| c).collect()
        } else {
            Vec::new()
        };
        let draw = |rng: &mut Rng| -> usize {
            if near.is_empty() {
                rng.gen_range(0..cand_len)
            } else {
                near[rng.gen_range(0..near.len())]
            }
        };
        for _ in 0..=MAX_REDRAWS {
            let c1 = BankRef { domain: cand_domain, index: draw(rng) };
            let c2 = BankRef { domain: cand_domain, index: draw(rng) };
            let (d1, d2) = (distance(anchor, c1), distance(anchor, c2));
            if let Some(t) = order_candidates(anchor, c1, c2, d1, d2, config.separation_delta) {
                out.push(t);
                break;
            }
        }
    }
    if out.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no candidate pair separated by {} could be drawn",
            config.separation_delta
        )));
    }
    Ok(out)
}

/// Picks the positive from two candidates, or `None` when their distances
/// to the anchor are within `delta` of each other.
pub fn order_candidates(anchor: BankRef, c1: BankRef, c2: BankRef, d1: f64, d2: f64, delta: f64) -> Option<Triplet> {
    let (positive, negative, d_pos, d_neg) = if d1 <= d2 { (c1, c2, d1, d2) } else { (c2, c1, d2, d1) };
    if d_pos + delta <= d_neg {
        Some(Triplet { anchor, positive, negative, d_pos, d_neg })
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(i: usize) -> BankRef {
        BankRef { domain: Domain::Robot, index: i }
    }

    #[test]
    fn closer_candidate_is_positive() {
        let t = order_candidates(r(0), r(1), r(2), 0.9, 0.2, 0.1).unwrap();
        assert_eq!(t.positive, r(2));
        assert_eq!(t.negative, r(1));
        assert!(t.d_pos + 0.1 <= t.d_neg);
    }

    #[test]
    fn near_ties_are_rejected() {
        assert!(order_candidates(r(0), r(1), r(2), 0.40, 0.45, 0.1).is_none());
    }
}
