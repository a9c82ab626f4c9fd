use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Sign, Stump};
use crate::error::{Error, Result};
use crate::num;
use crate::rng::{stream_rng, Stream};

/// Largest cell grid the exact census will enumerate.
pub const MAX_EXACT_CELLS: usize = 10_000_000;
/// Cells are listed individually in the report up to this count.
pub const MAX_LISTED_CELLS: usize = 4096;
/// Default ambiguity threshold relative to `Σα`.
pub const DEFAULT_RELATIVE_TAU: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryMethod {
    ExactCells,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedStump {
    pub stump: Stump,
    pub alpha: f64,
}

/// Vote `F(x) = Σ α_h h(x)`.
pub fn vote(stumps: &[WeightedStump], x: &[f64]) -> f64 {
    stumps
        .iter()
        .map(|ws| ws.alpha * ws.stump.predict_unchecked(x).as_f64())
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cell {
    #[serde(serialize_with = "num::vec_f64_17::serialize")]
    pub lower: Vec<f64>,
    #[serde(serialize_with = "num::vec_f64_17::serialize")]
    pub upper: Vec<f64>,
    #[serde(serialize_with = "num::f64_17::serialize")]
    pub volume: f64,
    #[serde(serialize_with = "num::f64_17::serialize")]
    pub value: f64,
    /// `+1`, `-1`, or `0` when `|F| < τ_F`.
    pub sign: i8,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Census {
    pub positive_cells: usize,
    pub negative_cells: usize,
    pub ambiguous_cells: usize,
    #[serde(serialize_with = "num::f64_17::serialize")]
    pub positive_volume: f64,
    #[serde(serialize_with = "num::f64_17::serialize")]
    pub negative_volume: f64,
    #[serde(serialize_with = "num::f64_17::serialize")]
    pub ambiguous_volume: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryReport {
    pub method: BoundaryMethod,
    /// The reference measure; the data distribution itself is unknown.
    pub measure: &'static str,
    #[serde(serialize_with = "num::f64_17::serialize")]
    pub tau_f: f64,
    #[serde(serialize_with = "num::f64_17::serialize")]
    pub alpha_sum: f64,
    #[serde(serialize_with = "num::f64_17::serialize")]
    pub ambiguous_mass: f64,
    #[serde(serialize_with = "num::f64_17::serialize")]
    pub positive_mass: f64,
    #[serde(serialize_with = "num::f64_17::serialize")]
    pub negative_mass: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standard_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub census: Option<Census>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<Cell>>,
    pub note: &'static str,
}

const NOTE: &str =
    "mass is uniform Lebesgue measure on [0,1]^n; ambiguity is |F| < tau_F, a numerical zero test";

#[derive(Clone, Copy, Debug)]
pub struct BoundaryOptions {
    pub method: BoundaryMethod,
    /// Absolute `τ_F`; defaults to `1e-9 · Σ|α|`.
    pub tau_f: Option<f64>,
    pub samples: usize,
    pub seed: u64,
}

pub fn boundary_report(
    stumps: &[WeightedStump],
    n: usize,
    opts: &BoundaryOptions,
) -> Result<BoundaryReport> {
    if stumps.is_empty() {
        return Err(Error::invalid(
            "boundary report needs at least one selected stump",
        ));
    }
    if n == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    for ws in stumps {
        if let Stump::Threshold { feature, .. } = ws.stump {
            if feature >= n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: feature + 1,
                });
            }
        }
    }
    let alpha_sum: f64 = stumps.iter().map(|ws| ws.alpha.abs()).sum();
    let tau_f = opts.tau_f.unwrap_or(DEFAULT_RELATIVE_TAU * alpha_sum);
    match opts.method {
        BoundaryMethod::ExactCells => exact_cells(stumps, n, tau_f, alpha_sum),
        BoundaryMethod::MonteCarlo => {
            monte_carlo(stumps, n, tau_f, alpha_sum, opts.samples, opts.seed)
        }
    }
}

fn classify(value: f64, tau_f: f64) -> i8 {
    if value.abs() < tau_f {
        0
    } else if value > 0.0 {
        1
    } else {
        -1
    }
}

fn exact_cells(
    stumps: &[WeightedStump],
    n: usize,
    tau_f: f64,
    alpha_sum: f64,
) -> Result<BoundaryReport> {
    if n > 3 {
        return Err(Error::ExactCellsUnsupported(n));
    }
    // Breakpoints per feature, including the cube faces.
    let mut cuts: Vec<Vec<f64>> = vec![vec![0.0, 1.0]; n];
    for ws in stumps {
        if let Stump::Threshold {
            feature, threshold, ..
        } = ws.stump
        {
            cuts[feature].push(threshold);
        }
    }
    for c in &mut cuts {
        c.sort_by(f64::total_cmp);
        c.dedup();
    }
    let cell_count = cuts
        .iter()
        .try_fold(1usize, |acc, c| acc.checked_mul(c.len() - 1))
        .filter(|&c| c <= MAX_EXACT_CELLS)
        .ok_or_else(|| {
            Error::invalid("too many cells for the exact census; use the monte-carlo method")
        })?;

    let mut census = Census::default();
    let mut cells = Vec::new();
    let mut index = vec![0usize; n];
    for _ in 0..cell_count {
        let lower: Vec<f64> = (0..n).map(|i| cuts[i][index[i]]).collect();
        let upper: Vec<f64> = (0..n).map(|i| cuts[i][index[i] + 1]).collect();
        let center: Vec<f64> = lower
            .iter()
            .zip(&upper)
            .map(|(a, b)| (a + b) / 2.0)
            .collect();
        let volume: f64 = lower.iter().zip(&upper).map(|(a, b)| b - a).product();
        let value = vote(stumps, &center);
        let sign = classify(value, tau_f);
        match sign {
            1 => {
                census.positive_cells += 1;
                census.positive_volume += volume;
            }
            -1 => {
                census.negative_cells += 1;
                census.negative_volume += volume;
            }
            _ => {
                census.ambiguous_cells += 1;
                census.ambiguous_volume += volume;
            }
        }
        if cell_count <= MAX_LISTED_CELLS {
            cells.push(Cell {
                lower,
                upper,
                volume,
                value,
                sign,
            });
        }
        // Odometer over the grid, first feature fastest.
        for i in 0..n {
            index[i] += 1;
            if index[i] + 1 < cuts[i].len() {
                break;
            }
            index[i] = 0;
        }
    }
    Ok(BoundaryReport {
        method: BoundaryMethod::ExactCells,
        measure: "uniform-lebesgue",
        tau_f,
        alpha_sum,
        ambiguous_mass: census.ambiguous_volume,
        positive_mass: census.positive_volume,
        negative_mass: census.negative_volume,
        standard_error: None,
        samples: None,
        cell_count: Some(cell_count),
        census: Some(census),
        cells: (cell_count <= MAX_LISTED_CELLS).then_some(cells),
        note: NOTE,
    })
}

fn monte_carlo(
    stumps: &[WeightedStump],
    n: usize,
    tau_f: f64,
    alpha_sum: f64,
    samples: usize,
    seed: u64,
) -> Result<BoundaryReport> {
    if samples == 0 {
        return Err(Error::invalid("monte-carlo needs at least one sample"));
    }
    let mut rng = stream_rng(seed, Stream::MonteCarlo);
    let mut counts = [0usize; 3];
    let mut x = vec![0.0; n];
    for _ in 0..samples {
        for v in &mut x {
            *v = rng.random::<f64>();
        }
        match classify(vote(stumps, &x), tau_f) {
            1 => counts[0] += 1,
            -1 => counts[1] += 1,
            _ => counts[2] += 1,
        }
    }
    let frac = |c: usize| c as f64 / samples as f64;
    let p = frac(counts[2]);
    Ok(BoundaryReport {
        method: BoundaryMethod::MonteCarlo,
        measure: "uniform-lebesgue",
        tau_f,
        alpha_sum,
        ambiguous_mass: p,
        positive_mass: frac(counts[0]),
        negative_mass: frac(counts[1]),
        standard_error: Some((p * (1.0 - p) / samples as f64).sqrt()),
        samples: Some(samples),
        cell_count: None,
        census: None,
        cells: None,
        note: NOTE,
    })
}

impl WeightedStump {
    pub fn new(stump: Stump, alpha: f64) -> Self {
        WeightedStump { stump, alpha }
    }

    pub fn constant(sign: Sign, alpha: f64) -> Self {
        WeightedStump::new(Stump::Constant(sign), alpha)
    }
}
