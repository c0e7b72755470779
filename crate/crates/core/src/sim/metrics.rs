use super::trace::Trace;
use crate::error::{Error, Result};

/// `|ξ₁|` threshold used for settling times.
pub const SETTLE_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub rms_tracking: f64,
    /// RMS of `e_F` pooled over every estimator step; 0 without estimators.
    pub rms_approx_error: f64,
    /// Largest `|η_i|` in the window.
    pub max_abs_state: f64,
    /// Fraction of samples with every `w_i = 1`.
    pub switch_duty: f64,
    /// First time after which `|ξ₁|` stays below the threshold;
    /// `f64::INFINITY` if it never settles.
    pub settle_time: f64,
}

/// Metrics over samples with `lo ≤ t ≤ hi`.
pub fn metrics(trace: &Trace, window: (f64, f64), settle_threshold: f64) -> Result<Metrics> {
    let (lo, hi) = window;
    let samples: Vec<_> = trace
        .samples
        .iter()
        .filter(|s| s.t >= lo && s.t <= hi)
        .collect();
    if samples.is_empty() {
        return Err(Error::invalid(
            "metrics.window",
            format!("no samples in [{lo}, {hi}]"),
        ));
    }
    let count = samples.len() as f64;
    let rms_tracking = (samples.iter().map(|s| s.xi[0] * s.xi[0]).sum::<f64>() / count).sqrt();

    let approx: Vec<f64> = samples
        .iter()
        .flat_map(|s| s.steps.iter().map(|st| st.e_f))
        .collect();
    let rms_approx_error = if approx.is_empty() {
        0.0
    } else {
        (approx.iter().map(|e| e * e).sum::<f64>() / approx.len() as f64).sqrt()
    };

    let max_abs_state = samples
        .iter()
        .flat_map(|s| s.eta.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));

    let on = samples
        .iter()
        .filter(|s| s.steps.iter().all(|st| st.w == 1.0))
        .count();
    let switch_duty = on as f64 / count;

    let settle_time = match samples
        .iter()
        .rposition(|s| s.xi[0].abs() >= settle_threshold)
    {
        None => samples[0].t,
        Some(last) if last + 1 < samples.len() => samples[last + 1].t,
        Some(_) => f64::INFINITY,
    };

    Ok(Metrics {
        rms_tracking,
        rms_approx_error,
        max_abs_state,
        switch_duty,
        settle_time,
    })
}
