use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::eval::bench::LatencyReport;
use crate::eval::metrics::PoseRow;
use crate::train::ModelKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_kind: ModelKind,
    pub human_chain: String,
    pub robot_chain: String,
    pub poses: usize,
    /// rad^2, mean over poses and joints against the oracle.
    pub joint_mse: f64,
    pub semantic_dgr_mean: f64,
    pub oracle_dgr_mean: f64,
    pub random_dgr_mean: f64,
    /// rad, mean per joint over fresh robot poses.
    pub reconstruction_l1: f64,
    pub triplet_agreement: Option<f64>,
    pub latency_mean: f64,
    pub latency_p99: f64,
    pub control_frequency: f64,
    pub rows: Vec<PoseRow>,
}

impl EvalReport {
    pub fn latency(&mut self, l: &LatencyReport) {
        self.latency_mean = l.mean_s;
        self.latency_p99 = l.p99_s;
        self.control_frequency = l.khz;
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per evaluated pose.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,retarget_dgr,oracle_dgr,random_dgr,joint_mse\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{}", r.index, r.retarget_dgr, r.oracle_dgr, r.random_dgr, r.joint_mse);
        }
        out
    }

    /// Metrics finite and nonnegative, agreement within [0, 1].
    pub fn is_consistent(&self) -> bool {
        let vals = [
            self.joint_mse,
            self.semantic_dgr_mean,
            self.oracle_dgr_mean,
            self.random_dgr_mean,
            self.reconstruction_l1,
            self.latency_mean,
            self.latency_p99,
            self.control_frequency,
        ];
        vals.iter().all(|v| v.is_finite() && *v >= 0.0) && self.triplet_agreement.map_or(true, |a| (0.0..=1.0).contains(&a))
    }
}
