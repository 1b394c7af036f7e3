//! Training objective: triplet, reconstruction and latent-consistency
//! terms, with exact gradients for all three networks.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::chain::Domain;
use crate::error::{Error, Result};
use crate::nn::Scalar;
use crate::train::model::{ModelGradients, RetargetModel};

/// Loss weights and the triplet margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub triplet: f64,
    pub rec: f64,
    pub ltc: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { alpha: 0.05, triplet: 10.0, rec: 5.0, ltc: 1.0 }
    }
}

/// Unweighted components and the weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub triplet: f64,
    pub rec: f64,
    pub ltc: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn weighted(triplet: f64, rec: f64, ltc: f64, w: &LossWeights) -> Self {
        LossBreakdown { triplet, rec, ltc, total: w.triplet * triplet + w.rec * rec + w.ltc * ltc }
    }

    pub fn is_finite(&self) -> bool {
        self.triplet.is_finite() && self.rec.is_finite() && self.ltc.is_finite() && self.total.is_finite()
    }
}

/// `max(|z_o - z_p| - |z_o - z_n| + alpha, 0)`.
pub fn triplet_loss(z_o: &[f64], z_p: &[f64], z_n: &[f64], alpha: f64) -> Result<f64> {
    if z_o.len() != z_p.len() || z_o.len() != z_n.len() {
        return Err(Error::ShapeMismatch(format!(
            "triplet latents have lengths {}, {}, {}",
            z_o.len(),
            z_p.len(),
            z_n.len()
        )));
    }
    let dp = euclid(z_o, z_p);
    let dn = euclid(z_o, z_n);
    Ok((dp - dn + alpha).max(0.0))
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `sum_j |x - D(Q_r(x))|`, averaged over the batch.
pub fn reconstruction_loss<T: Scalar>(model: &RetargetModel<T>, x_r: ArrayView2<T>) -> Result<f64> {
    if x_r.ncols() != model.robot_chain.pose_width() {
        return Err(Error::ChainMismatch(format!(
            "robot batch has {} columns, chain '{}' needs {}",
            x_r.ncols(),
            model.robot_chain.name(),
            model.robot_chain.pose_width()
        )));
    }
    let z = model.encoder_r.predict(x_r)?;
    let x_hat = model.decoder.predict(z.view())?;
    Ok(mean_row_l1(x_r, x_hat.view()))
}

/// `sum_k |Q_h(x) - Q_r(D(Q_h(x)))|`, averaged over the batch.
pub fn latent_consistency_loss<T: Scalar>(model: &RetargetModel<T>, x_h: ArrayView2<T>) -> Result<f64> {
    if x_h.ncols() != model.human_chain.pose_width() {
        return Err(Error::ChainMismatch(format!(
            "human batch has {} columns, chain '{}' needs {}",
            x_h.ncols(),
            model.human_chain.name(),
            model.human_chain.pose_width()
        )));
    }
    let z = model.encoder_h.predict(x_h)?;
    let x_hat = model.decoder.predict(z.view())?;
    let z2 = model.encoder_r.predict(x_hat.view())?;
    Ok(mean_row_l1(z.view(), z2.view()))
}

fn mean_row_l1<T: Scalar>(a: ArrayView2<T>, b: ArrayView2<T>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    let total: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x.as_f64() - y.as_f64()).abs()).sum();
    total / a.nrows() as f64
}

/// Sign with `sign(0) = 0` (the L1 subgradient we use at the kink).
#[inline]
fn sign<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Reference to one triplet member inside a [`TrainBatch`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchRef {
    pub domain: Domain,
    /// Row of `human` or `robot`.
    pub row: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchTriplet {
    pub anchor: BatchRef,
    pub positive: BatchRef,
    pub negative: BatchRef,
}

/// Everything one optimization step looks at. Every robot row enters the
/// reconstruction term and every human row the latent-consistency term;
/// triplets refer to rows of either matrix.
#[derive(Debug, Clone)]
pub struct TrainBatch<T> {
    pub human: Array2<T>,
    pub robot: Array2<T>,
    pub triplets: Vec<BatchTriplet>,
}

/// Loss of a batch and, optionally, its gradient for every parameter.
pub fn total_loss<T: Scalar>(
    batch: &TrainBatch<T>,
    model: &RetargetModel<T>,
    weights: &LossWeights,
    with_grad: bool,
) -> Result<(LossBreakdown, Option<ModelGradients<T>>)> {
    let nh = batch.human.nrows();
    let nr = batch.robot.nrows();
    let d = model.latent_dim();
    for t in &batch.triplets {
        for r in [&t.anchor, &t.positive, &t.negative] {
            let limit = if r.domain == Domain::Human { nh } else { nr };
            if r.row >= limit {
                return Err(Error::ShapeMismatch(format!("triplet member {r:?} outside the batch")));
            }
        }
    }

    let (zh, cache_h) = model.encoder_h.forward(batch.human.view())?;
    let (zr, cache_r) = model.encoder_r.forward(batch.robot.view())?;
    let dec_in = concatenate(Axis(0), &[zr.view(), zh.view()]).expect("latent widths agree");
    let (x_hat, cache_d) = model.decoder.forward(dec_in.view())?;
    let (z2, cache_r2) = model.encoder_r.forward(x_hat.slice(s![nr.., ..]))?;

    let mut dzh = Array2::<T>::zeros((nh, d));
    let mut dzr = Array2::<T>::zeros((nr, d));

    // triplet term
    let latent = |r: &BatchRef| match r.domain {
        Domain::Human => zh.row(r.row),
        Domain::Robot => zr.row(r.row),
    };
    let mut l_triplet = 0.0;
    let nt = batch.triplets.len();
    let t_scale = if nt > 0 { weights.triplet / nt as f64 } else { 0.0 };
    for t in &batch.triplets {
        let (zo, zp, zn) = (latent(&t.anchor), latent(&t.positive), latent(&t.negative));
        let diff_p: Vec<f64> = zo.iter().zip(zp.iter()).map(|(a, b)| a.as_f64() - b.as_f64()).collect();
        let diff_n: Vec<f64> = zo.iter().zip(zn.iter()).map(|(a, b)| a.as_f64() - b.as_f64()).collect();
        let dp = diff_p.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dn = diff_n.iter().map(|v| v * v).sum::<f64>().sqrt();
        let margin = dp - dn + weights.alpha;
        if margin <= 0.0 {
            continue;
        }
        l_triplet += margin;
        if !with_grad || t_scale == 0.0 {
            continue;
        }
        // d|u|/du = u/|u|, taken as 0 at u = 0
        let inv_p = if dp > 0.0 { t_scale / dp } else { 0.0 };
        let inv_n = if dn > 0.0 { t_scale / dn } else { 0.0 };
        for k in 0..d {
            let gp = diff_p[k] * inv_p;
            let gn = diff_n[k] * inv_n;
            add_latent_grad(&mut dzh, &mut dzr, &t.anchor, k, gp - gn);
            add_latent_grad(&mut dzh, &mut dzr, &t.positive, k, -gp);
            add_latent_grad(&mut dzh, &mut dzr, &t.negative, k, gn);
        }
    }
    if nt > 0 {
        l_triplet /= nt as f64;
    }

    // reconstruction term
    let x_rec = x_hat.slice(s![..nr, ..]);
    let l_rec = mean_row_l1(batch.robot.view(), x_rec);

    // latent consistency term
    let l_ltc = mean_row_l1(zh.view(), z2.view());

    let loss = LossBreakdown::weighted(l_triplet, l_rec, l_ltc, weights);
    if !with_grad {
        return Ok((loss, None));
    }

    let ltc_scale = T::cast_from(if nh > 0 { weights.ltc / nh as f64 } else { 0.0 });
    let ltc_sign = (&zh - &z2).mapv(sign);
    let dz2 = ltc_sign.mapv(|v| -v * ltc_scale);
    dzh.scaled_add(ltc_scale, &ltc_sign);

    let g_r2 = model.encoder_r.backward(&cache_r2, dz2.view(), true)?;
    let rec_scale = T::cast_from(if nr > 0 { weights.rec / nr as f64 } else { 0.0 });
    let dx_rec = (&batch.robot - &x_rec).mapv(|v| -sign(v) * rec_scale);
    let dx_hat = concatenate(Axis(0), &[dx_rec.view(), g_r2.input.as_ref().expect("input grad requested").view()])
        .expect("decoder output widths agree");
    let g_d = model.decoder.backward(&cache_d, dx_hat.view(), true)?;
    let dz_dec = g_d.input.as_ref().expect("input grad requested");
    dzr.scaled_add(T::one(), &dz_dec.slice(s![..nr, ..]));
    dzh.scaled_add(T::one(), &dz_dec.slice(s![nr.., ..]));

    let g_h = model.encoder_h.backward(&cache_h, dzh.view(), false)?;
    let mut g_r = model.encoder_r.backward(&cache_r, dzr.view(), false)?;
    g_r.accumulate(&g_r2);

    let mut g_d = g_d;
    g_d.input = None;
    Ok((loss, Some(ModelGradients { encoder_h: g_h, encoder_r: g_r, decoder: g_d })))
}

/// Distance of the batch from the nearest point where the loss is not
/// differentiable: a triplet hinge at zero, a zero latent distance, or a
/// zero residual in either L1 term. Finite-difference checks need this to
/// comfortably exceed the probe step's effect.
pub fn kink_margin<T: Scalar>(batch: &TrainBatch<T>, model: &RetargetModel<T>, weights: &LossWeights) -> Result<f64> {
    let zh = model.encoder_h.predict(batch.human.view())?;
    let zr = model.encoder_r.predict(batch.robot.view())?;
    let x_rec = model.decoder.predict(zr.view())?;
    let x_ltc = model.decoder.predict(zh.view())?;
    let z2 = model.encoder_r.predict(x_ltc.view())?;
    let row = |r: &BatchRef| -> Vec<f64> {
        let m = if r.domain == Domain::Human { &zh } else { &zr };
        m.row(r.row).iter().map(|v| v.as_f64()).collect()
    };
    let mut margin = f64::INFINITY;
    for t in &batch.triplets {
        let (o, p, n) = (row(&t.anchor), row(&t.positive), row(&t.negative));
        let (dp, dn) = (euclid(&o, &p), euclid(&o, &n));
        margin = margin.min((dp - dn + weights.alpha).abs()).min(dp).min(dn);
    }
    for (a, b) in batch.robot.iter().zip(x_rec.iter()).chain(zh.iter().zip(z2.iter())) {
        margin = margin.min((a.as_f64() - b.as_f64()).abs());
    }
    Ok(margin)
}

#[inline]
fn add_latent_grad<T: Scalar>(dzh: &mut Array2<T>, dzr: &mut Array2<T>, r: &BatchRef, k: usize, g: f64) {
    let target = match r.domain {
        Domain::Human => dzh,
        Domain::Robot => dzr,
    };
    target[[r.row, k]] += T::cast_from(g);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplet_examples() {
        let o = [0.0, 0.0];
        assert_eq!(triplet_loss(&o, &o, &[1.0, 0.0], 0.05).unwrap(), 0.0);
        assert!((triplet_loss(&o, &o, &o, 0.05).unwrap() - 0.05).abs() < 1e-15);
        let l = triplet_loss(&o, &[0.3, 0.0], &[0.0, 0.1], 0.05).unwrap();
        assert!((l - 0.25).abs() < 1e-12);
        assert!(triplet_loss(&o, &[0.0], &o, 0.05).is_err());
    }

    #[test]
    fn weighted_total() {
        let w = LossWeights::default();
        let l = LossBreakdown::weighted(0.1, 0.2, 0.3, &w);
        assert!((l.total - 2.3).abs() < 1e-12);
        assert_eq!(LossBreakdown::weighted(0.0, 0.0, 0.0, &w).total, 0.0);
    }

    #[test]
    fn sign_at_zero_is_zero() {
        assert_eq!(sign(0.0f64), 0.0);
        assert_eq!(sign(-0.0f64), 0.0);
        assert_eq!(sign(-2.0f32), -1.0);
    }
}
