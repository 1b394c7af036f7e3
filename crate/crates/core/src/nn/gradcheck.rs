//! Central-difference verification of analytic gradients.

use crate::nn::params::Parameters;

/// Above this many parameters only a strided subsample is checked.
pub const FULL_CHECK_LIMIT: usize = 10_000;

/// Gradients smaller than this are compared on an absolute scale.
pub const RELATIVE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Parameter index where the relative error peaked.
    pub worst_index: usize,
    pub checked: usize,
    pub pass: bool,
}

/// Compares `analytic` (flattened in [`Parameters`] order) against central
/// differences of `loss` with step `h`.
///
/// Relative error is `|a - n| / max(|a|, |n|, RELATIVE_FLOOR)`.
pub fn finite_diff_check<M, F>(model: &M, loss: F, analytic: &[f64], h: f64, tolerance: f64) -> GradCheckReport
where
    M: Parameters + Clone,
    F: Fn(&M) -> f64,
{
    let n = model.num_params();
    assert_eq!(analytic.len(), n, "analytic gradient length");
    let stride = n.div_ceil(FULL_CHECK_LIMIT).max(1);
    let base = model.flat_params();
    let mut probe = model.clone();
    let mut params = base.clone();
    let mut report = GradCheckReport { max_rel_error: 0.0, max_abs_error: 0.0, worst_index: 0, checked: 0, pass: true };
    for i in (0..n).step_by(stride) {
        params[i] = base[i] + h;
        probe.set_flat_params(&params);
        let up = loss(&probe);
        params[i] = base[i] - h;
        probe.set_flat_params(&params);
        let down = loss(&probe);
        params[i] = base[i];
        let numeric = (up - down) / (2.0 * h);
        let abs = (analytic[i] - numeric).abs();
        let rel = abs / analytic[i].abs().max(numeric.abs()).max(RELATIVE_FLOOR);
        if !rel.is_finite() || rel > report.max_rel_error {
            report.max_rel_error = if rel.is_finite() { rel } else { f64::INFINITY };
            report.worst_index = i;
        }
        report.max_abs_error = report.max_abs_error.max(abs);
        report.checked += 1;
    }
    report.pass = report.max_rel_error < tolerance;
    report
}
