use serde::Serialize;

use crate::engine::RoundRecord;
use crate::error::{Error, Result};
use crate::num::{self, Num};

/// How a round's argmin set looks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieClass {
    /// A unique minimizer.
    NoTie,
    /// Several minimizers, all with identical predictions on the data.
    AgreeingTie,
    /// Several minimizers that disagree on some example.
    DisagreeingTie,
}

pub fn classify(record: &RoundRecord) -> TieClass {
    if record.tie_size <= 1 {
        TieClass::NoTie
    } else if record.tie_agreement {
        TieClass::AgreeingTie
    } else {
        TieClass::DisagreeingTie
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TiedRound {
    pub t: u64,
    pub class: TieClass,
    pub tie_size: usize,
    pub disagreement_mass: Num,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TieReport {
    pub rounds: usize,
    pub no_tie_rounds: usize,
    pub agreeing_tie_rounds: usize,
    pub disagreeing_tie_rounds: usize,
    #[serde(serialize_with = "num::f64_17::serialize")]
    pub tie_fraction: f64,
    pub last_disagreeing_round: Option<u64>,
    /// Every round with more than one minimizer.
    pub tied_rounds: Vec<TiedRound>,
    /// First round of the final-third window.
    pub tail_start: u64,
    /// Least-squares slope of disagreement mass against `t` over the tail.
    #[serde(serialize_with = "num::f64_17::serialize")]
    pub tail_slope: f64,
    #[serde(serialize_with = "num::f64_17::serialize")]
    pub tail_initial_mass: f64,
    #[serde(serialize_with = "num::f64_17::serialize")]
    pub tail_final_mass: f64,
    /// No disagreeing tie anywhere in the tail.
    pub tail_free_of_disagreement: bool,
    /// Finite-horizon stand-in for "disagreement mass tends to zero": the
    /// tail is free of disagreement, or its slope is negative and the final
    /// mass is below a tenth of the initial one.
    pub vanishing_mass_proxy: bool,
    /// Float traces decide ties up to a relative tolerance.
    pub tolerance_qualified: bool,
}

pub fn tie_report(records: &[RoundRecord]) -> Result<TieReport> {
    if records.is_empty() {
        return Err(Error::invalid("tie report needs a non-empty trace"));
    }
    let mut counts = [0usize; 3];
    let mut tied_rounds = Vec::new();
    let mut last_disagreeing = None;
    for r in records {
        let class = classify(r);
        if r.tie_agreement && !r.disagreement_mass.is_zero() {
            return Err(Error::Invariant(format!(
                "round {}: agreeing tie with non-zero disagreement mass",
                r.t
            )));
        }
        counts[class as usize] += 1;
        if class == TieClass::DisagreeingTie {
            last_disagreeing = Some(r.t);
        }
        if class != TieClass::NoTie {
            tied_rounds.push(TiedRound {
                t: r.t,
                class,
                tie_size: r.tie_size,
                disagreement_mass: r.disagreement_mass.clone(),
            });
        }
    }

    let tail = &records[records.len() - (records.len() / 3).max(1)..];
    let xs: Vec<f64> = tail.iter().map(|r| r.t as f64).collect();
    let ys: Vec<f64> = tail.iter().map(|r| r.disagreement_mass.to_f64()).collect();
    let tail_slope = slope(&xs, &ys);
    let tail_initial_mass = ys[0];
    let tail_final_mass = *ys.last().expect("tail is non-empty");
    let tail_free = tail.iter().all(|r| classify(r) != TieClass::DisagreeingTie);
    let vanishing = tail_free || (tail_slope < 0.0 && tail_final_mass < tail_initial_mass / 10.0);

    Ok(TieReport {
        rounds: records.len(),
        no_tie_rounds: counts[TieClass::NoTie as usize],
        agreeing_tie_rounds: counts[TieClass::AgreeingTie as usize],
        disagreeing_tie_rounds: counts[TieClass::DisagreeingTie as usize],
        tie_fraction: (records.len() - counts[0]) as f64 / records.len() as f64,
        last_disagreeing_round: last_disagreeing,
        tied_rounds,
        tail_start: tail[0].t,
        tail_slope,
        tail_initial_mass,
        tail_final_mass,
        tail_free_of_disagreement: tail_free,
        vanishing_mass_proxy: vanishing,
        tolerance_qualified: records.iter().any(|r| matches!(r.epsilon, Num::Float(_))),
    })
}

/// Ordinary least-squares slope; 0 for fewer than two points.
pub(crate) fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}
