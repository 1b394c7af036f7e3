use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::nn::Scalar;
use crate::pose::HumanPose;
use crate::train::RetargetModel;

pub const BENCH_WARMUP: usize = 100;
pub const BENCH_MIN_CALLS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub calls: usize,
    pub mean_s: f64,
    pub p99_s: f64,
    /// `1 / mean latency in ms`.
    pub khz: f64,
}

/// Times `n` single-pose retarget calls on the current thread, cycling
/// through `poses`, after [`BENCH_WARMUP`] untimed calls.
pub fn bench_latency<T: Scalar>(model: &RetargetModel<T>, poses: &[HumanPose], n: usize) -> Result<LatencyReport> {
    if n < BENCH_MIN_CALLS {
        return Err(Error::Validation(format!("latency bench needs at least {BENCH_MIN_CALLS} calls, got {n}")));
    }
    if poses.is_empty() {
        return Err(Error::InsufficientData("latency bench needs at least one pose".into()));
    }
    for i in 0..BENCH_WARMUP {
        std::hint::black_box(model.retarget(&poses[i % poses.len()])?);
    }
    let mut times = Vec::with_capacity(n);
    for i in 0..n {
        let pose = &poses[i % poses.len()];
        let t = Instant::now();
        std::hint::black_box(model.retarget(std::hint::black_box(pose))?);
        times.push(t.elapsed().as_secs_f64());
    }
    let mean_s = times.iter().sum::<f64>() / n as f64;
    times.sort_by(f64::total_cmp);
    let p99_s = times[((n as f64 * 0.99).ceil() as usize).min(n) - 1];
    Ok(LatencyReport { calls: n, mean_s, p99_s, khz: 1.0 / (mean_s * 1e3) })
}
