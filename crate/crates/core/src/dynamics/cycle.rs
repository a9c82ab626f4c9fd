use serde::Serialize;

use crate::error::{Error, Result};
use crate::num;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleReport {
    pub detected: bool,
    /// Smallest period that recurs over the whole window.
    pub period: Option<usize>,
    /// Round from which the recurrence holds without interruption.
    pub burn_in: Option<u64>,
    /// `max ‖w_{t+p} - w_t‖₁` over the window, for the reported period or,
    /// when nothing is detected, the best candidate period.
    #[serde(serialize_with = "num::f64_17::serialize")]
    pub recurrence_norm: f64,
    pub best_period: usize,
    pub window: usize,
    #[serde(serialize_with = "num::f64_17::serialize")]
    pub tolerance: f64,
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Max L1 recurrence distance at period `p` over the final `window` starts.
pub fn recurrence_norm(snapshots: &[Vec<f64>], p: usize, window: usize) -> Option<f64> {
    let len = snapshots.len();
    if p == 0 || window == 0 || len < window + p {
        return None;
    }
    let start = len - p - window;
    Some(
        (start..start + window)
            .map(|t| l1_distance(&snapshots[t + p], &snapshots[t]))
            .fold(0.0, f64::max),
    )
}

/// Finds the smallest `p <= p_max` with `‖w_{t+p} - w_t‖₁ < tolerance` for
/// every `t` in the final window. `snapshots[k]` holds `w_{first_round + k}`.
pub fn detect_cycle(
    snapshots: &[Vec<f64>],
    first_round: u64,
    tolerance: f64,
    p_max: usize,
    window: usize,
) -> Result<CycleReport> {
    if window == 0 || p_max == 0 {
        return Err(Error::invalid("window and maximum period must be positive"));
    }
    if snapshots.len() < window + 1 {
        return Err(Error::invalid(format!(
            "cycle detection over a window of {window} needs at least {} snapshots, got {}",
            window + 1,
            snapshots.len()
        )));
    }
    if let Some(bad) = snapshots.iter().find(|s| s.len() != snapshots[0].len()) {
        return Err(Error::DimensionMismatch {
            expected: snapshots[0].len(),
            got: bad.len(),
        });
    }

    let mut best = (usize::MAX, f64::INFINITY);
    for p in 1..=p_max {
        let Some(norm) = recurrence_norm(snapshots, p, window) else {
            break;
        };
        if norm < best.1 {
            best = (p, norm);
        }
        if norm < tolerance {
            let mut start = snapshots.len() - p - window;
            while start > 0
                && l1_distance(&snapshots[start - 1 + p], &snapshots[start - 1]) < tolerance
            {
                start -= 1;
            }
            return Ok(CycleReport {
                detected: true,
                period: Some(p),
                burn_in: Some(first_round + start as u64),
                recurrence_norm: norm,
                best_period: p,
                window,
                tolerance,
            });
        }
    }
    Ok(CycleReport {
        detected: false,
        period: None,
        burn_in: None,
        recurrence_norm: best.1,
        best_period: best.0,
        window,
        tolerance,
    })
}
