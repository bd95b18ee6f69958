//! Error and accuracy metrics, dB conversion and steady-state summaries.

use serde::{Deserialize, Serialize};

use crate::error::{DiffnetError, Result};

/// A per-slot sequence of one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub values: Vec<f64>,
    pub kind: TraceKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    SquaredError,
    Accuracy,
}

/// Sentinel returned for an exactly zero MSE.
pub const MSE_DB_FLOOR: f64 = -3000.0;

/// `10·log10(mse)`; values below 1e-300 return the floor sentinel.
pub fn mse_db(mse: f64) -> f64 {
    assert!(mse >= 0.0, "mse must be nonnegative, got {mse}");
    if mse < 1e-300 {
        MSE_DB_FLOOR
    } else {
        10.0 * mse.log10()
    }
}

/// 1 iff the thresholded prediction agrees with the label; the ≥ 0.5
/// probability threshold matches the sign rule on the raw score, with ties
/// resolved toward class 1.
pub fn classification_accuracy(prediction: f64, label: f64) -> f64 {
    let predicted_positive = prediction >= 0.5;
    let is_positive = label == 1.0;
    if predicted_positive == is_positive {
        1.0
    } else {
        0.0
    }
}

/// Mean and standard deviation over the final `window` slots.
pub fn steady_state(trace: &[f64], window: usize) -> Result<(f64, f64)> {
    if window == 0 || window > trace.len() {
        return Err(DiffnetError::InvalidConfig(format!(
            "steady-state window {window} out of range for trace of length {}",
            trace.len()
        )));
    }
    let tail = &trace[trace.len() - window..];
    let mean = tail.iter().sum::<f64>() / window as f64;
    let var = tail.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / window as f64;
    Ok((mean, var.sqrt()))
}

/// Default steady-state window: the last 10% of slots, at least one.
pub fn default_window(slots: usize) -> usize {
    (slots / 10).max(1)
}
