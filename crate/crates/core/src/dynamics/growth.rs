use std::collections::HashSet;
use std::io::Write;

use serde::Serialize;

use crate::engine::RoundRecord;
use crate::error::{Error, Result};
use crate::num;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GrowthPoint {
    #[serde(rename = "T")]
    pub t: u64,
    pub unique_count: usize,
}

/// `|Û_T|` at each checkpoint.
///
/// With a record for every round the count is recomputed from the selected
/// stump ids; a checkpoint-only trace uses each record's running count.
pub fn unique_growth_curve(
    records: &[RoundRecord],
    checkpoints: &[u64],
) -> Result<Vec<GrowthPoint>> {
    let last = records.last().map_or(0, |r| r.t);
    if let Some(&t) = checkpoints.iter().find(|&&t| t == 0 || t > last) {
        return Err(Error::invalid(format!(
            "checkpoint {t} is outside the trace (rounds 1..={last})"
        )));
    }
    let complete = records.iter().enumerate().all(|(k, r)| r.t == k as u64 + 1);
    let mut sorted = checkpoints.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if complete {
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(sorted.len());
        let mut next = sorted.iter().peekable();
        for r in records {
            seen.insert(r.stump_id);
            while next.peek().is_some_and(|&&t| t == r.t) {
                out.push(GrowthPoint {
                    t: r.t,
                    unique_count: seen.len(),
                });
                next.next();
            }
        }
        Ok(out)
    } else {
        sorted
            .iter()
            .map(|&t| {
                records
                    .iter()
                    .find(|r| r.t == t)
                    .map(|r| GrowthPoint {
                        t,
                        unique_count: r.unique_count,
                    })
                    .ok_or_else(|| Error::invalid(format!("trace has no record for round {t}")))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthFit {
    pub checkpoints: Vec<GrowthPoint>,
    /// Checkpoints with `T >= 10` that entered the regression.
    pub points_used: usize,
    /// Fitted `c` in `log|Û_T| = c·log(log T + 1) + b`.
    #[serde(serialize_with = "num::f64_17::serialize")]
    pub exponent: f64,
    #[serde(serialize_with = "num::f64_17::serialize")]
    pub intercept: f64,
    #[serde(serialize_with = "num::f64_17::serialize")]
    pub r_squared: f64,
    /// `|Û|` is the same at every fitted checkpoint; the exponent is set to 0.
    pub degenerate: bool,
    /// The final count already equals `|Ê|`, so growth cannot continue.
    pub saturated: bool,
    pub effective_size: Option<usize>,
}

/// Least-squares fit of `ln|Û_T|` against `ln(ln T + 1)`.
///
/// The exponent is a measurement; nothing is asserted about its range.
pub fn fit_log_growth(curve: &[GrowthPoint], effective_size: Option<usize>) -> Result<GrowthFit> {
    if curve
        .windows(2)
        .any(|w| w[1].unique_count < w[0].unique_count)
    {
        return Err(Error::Invariant("unique-stump curve decreases".into()));
    }
    let points: Vec<(u64, f64)> = curve.iter().map(|p| (p.t, p.unique_count as f64)).collect();
    let reg = log_growth_regression(&points)?;
    let saturated =
        effective_size.is_some_and(|e| curve.last().is_some_and(|p| p.unique_count >= e));
    Ok(GrowthFit {
        checkpoints: curve.to_vec(),
        points_used: reg.points_used,
        exponent: reg.exponent,
        intercept: reg.intercept,
        r_squared: reg.r_squared,
        degenerate: reg.degenerate,
        saturated,
        effective_size,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Regression {
    pub points_used: usize,
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub degenerate: bool,
}

/// Regression of `ln y` on `ln(ln T + 1)` over the points with `T >= 10`.
///
/// A flat series is degenerate: the exponent is 0 and `R²` is 0.
pub fn log_growth_regression(points: &[(u64, f64)]) -> Result<Regression> {
    let used: Vec<(u64, f64)> = points.iter().copied().filter(|p| p.0 >= 10).collect();
    if used.len() < 4 {
        return Err(Error::invalid(format!(
            "growth fit needs at least 4 checkpoints with T >= 10, got {}",
            used.len()
        )));
    }
    if used.iter().any(|p| p.1.is_nan() || p.1 <= 0.0) {
        return Err(Error::invalid("unique counts must be positive"));
    }
    let degenerate = used.iter().all(|p| p.1 == used[0].1);
    let xs: Vec<f64> = used
        .iter()
        .map(|p| ((p.0 as f64).ln() + 1.0).ln())
        .collect();
    let ys: Vec<f64> = used.iter().map(|p| p.1.ln()).collect();
    let (exponent, intercept, r_squared) = if degenerate {
        (0.0, ys[0], 0.0)
    } else {
        least_squares(&xs, &ys)
    };
    Ok(Regression {
        points_used: used.len(),
        exponent,
        intercept,
        r_squared,
        degenerate,
    })
}

/// Returns `(slope, intercept, R²)`.
fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    (slope, intercept, r2)
}

/// CSV with columns `T,unique_count`.
pub fn write_curve_csv(curve: &[GrowthPoint], mut out: impl Write) -> Result<()> {
    writeln!(out, "T,unique_count")?;
    for p in curve {
        writeln!(out, "{},{}", p.t, p.unique_count)?;
    }
    Ok(())
}
