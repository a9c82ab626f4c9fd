use std::collections::HashMap;

use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;

use crate::engine::RoundRecord;
use crate::error::{Error, Result};
use crate::num::{self, Num};
use crate::stumps::HypothesisInventory;

pub const DEFAULT_CONVERGENCE_DELTA: f64 = 1e-4;

/// Cauchy-style check `|avg_T - avg_⌊T/2⌋| < δ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Verdict {
    #[serde(serialize_with = "num::f64_17::serialize")]
    pub gap: f64,
    pub converged: bool,
}

impl Verdict {
    fn new(gap: f64, delta: f64) -> Self {
        Verdict {
            gap,
            converged: gap < delta,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeAverages {
    pub rounds: u64,
    /// `ε̄_T` for `T = 1..`; exact when the trace is exact.
    pub epsilon_running: Vec<Num>,
    #[serde(serialize_with = "num::vec_f64_17::serialize")]
    pub alpha_running: Vec<f64>,
    /// Normalized margins `y_l F_T(x_l) / Σα` at the final round.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margins: Option<Vec<f64>>,
    /// Margins at round `⌊T/2⌋`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margins_half: Option<Vec<f64>>,
    #[serde(serialize_with = "num::f64_17::serialize")]
    pub delta: f64,
    pub epsilon_verdict: Verdict,
    pub alpha_verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin_verdict: Option<Verdict>,
}

impl TimeAverages {
    pub fn epsilon_mean(&self) -> &Num {
        self.epsilon_running.last().expect("non-empty")
    }

    pub fn alpha_mean(&self) -> f64 {
        *self.alpha_running.last().expect("non-empty")
    }
}

/// Running means of `ε_t` and `α_t`, and example margins when the inventory
/// is given. Needs a record for every round `1..=T`.
pub fn time_averages(
    records: &[RoundRecord],
    inventory: Option<&HypothesisInventory>,
    delta: f64,
) -> Result<TimeAverages> {
    if records.is_empty() {
        return Err(Error::invalid("time averages need a non-empty trace"));
    }
    if !records.iter().enumerate().all(|(k, r)| r.t == k as u64 + 1) {
        return Err(Error::invalid(
            "time averages need a record for every round",
        ));
    }
    let alpha_total: f64 = records.iter().map(|r| r.alpha).sum();
    if alpha_total <= 0.0 {
        return Err(Error::invalid("total vote weight is zero"));
    }

    let epsilon_running = running_mean_num(records.iter().map(|r| &r.epsilon));
    let alpha_running = running_mean_f64(records.iter().map(|r| r.alpha));

    let t = records.len();
    let half = (t / 2).max(1);
    let epsilon_gap = (epsilon_running[t - 1].to_f64() - epsilon_running[half - 1].to_f64()).abs();
    let alpha_gap = (alpha_running[t - 1] - alpha_running[half - 1]).abs();

    let (margins, margins_half, margin_verdict) = match inventory {
        Some(inv) => {
            let full = margins_at(records, inv)?;
            let early = margins_at(&records[..half], inv)?;
            let gap = full
                .iter()
                .zip(&early)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            (Some(full), Some(early), Some(Verdict::new(gap, delta)))
        }
        None => (None, None, None),
    };

    Ok(TimeAverages {
        rounds: t as u64,
        epsilon_running,
        alpha_running,
        margins,
        margins_half,
        delta,
        epsilon_verdict: Verdict::new(epsilon_gap, delta),
        alpha_verdict: Verdict::new(alpha_gap, delta),
        margin_verdict,
    })
}

/// Normalized margin of every example after the given rounds.
pub fn margins_at(records: &[RoundRecord], inv: &HypothesisInventory) -> Result<Vec<f64>> {
    let mut per_stump: HashMap<usize, f64> = HashMap::new();
    for r in records {
        *per_stump.entry(r.stump_id).or_insert(0.0) += r.alpha;
    }
    let total: f64 = per_stump.values().sum();
    if total <= 0.0 {
        return Err(Error::invalid("total vote weight is zero"));
    }
    let mut ids: Vec<(usize, f64)> = per_stump.into_iter().collect();
    ids.sort_unstable_by_key(|&(id, _)| id);
    let mut margins = vec![0.0; inv.m()];
    for (id, alpha) in ids {
        let mistakes = inv
            .mistakes(id)
            .ok_or_else(|| Error::invalid(format!("stump id {id} is not in the inventory")))?;
        for (l, margin) in margins.iter_mut().enumerate() {
            // y·h(x) is -1 on a mistake and +1 otherwise.
            *margin += if mistakes.contains(l) { -alpha } else { alpha };
        }
    }
    Ok(margins.into_iter().map(|v| v / total).collect())
}

/// `avg_T = avg_{T-1} + (x_T - avg_{T-1}) / T`, exactly for exact inputs.
fn running_mean_num<'a>(values: impl Iterator<Item = &'a Num> + Clone) -> Vec<Num> {
    if values.clone().all(|v| matches!(v, Num::Exact(_))) {
        let mut avg = BigRational::zero();
        values
            .enumerate()
            .map(|(k, v)| {
                let x = v.as_exact().expect("checked exact");
                avg = &avg + (x - &avg) / BigRational::from_integer((k as i64 + 1).into());
                Num::Exact(avg.clone())
            })
            .collect()
    } else {
        running_mean_f64(values.map(Num::to_f64))
            .into_iter()
            .map(Num::Float)
            .collect()
    }
}

fn running_mean_f64(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut avg = 0.0;
    values
        .enumerate()
        .map(|(k, x)| {
            avg += (x - avg) / (k as f64 + 1.0);
            avg
        })
        .collect()
}
