//! Synthetic sources over `[0,1]^n × {-1,+1}` and dataset CSV files.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{Dataset, Example, Sign};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Deterministic labeling rule applied before noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelRule {
    /// `y = sign(x_1 - theta)`; a boundary of measure zero.
    AxisThreshold { theta: f64 },
    /// `y = sign(a·x - b)`.
    Halfspace { normal: Vec<f64>, offset: f64 },
    /// Parity of the `k×…×k` grid cell containing `x`.
    Checker { k: usize },
}

impl LabelRule {
    /// Label at `x`; points on a boundary get `+1`.
    pub fn label(&self, x: &[f64]) -> Sign {
        let positive = match self {
            LabelRule::AxisThreshold { theta } => x[0] >= *theta,
            LabelRule::Halfspace { normal, offset } => {
                normal.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() >= *offset
            }
            LabelRule::Checker { k } => {
                let cells: usize = x
                    .iter()
                    .map(|v| ((v * *k as f64).floor() as usize).min(k - 1))
                    .sum();
                cells.is_multiple_of(2)
            }
        };
        if positive {
            Sign::Pos
        } else {
            Sign::Neg
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub n: usize,
    pub rule: LabelRule,
    /// Independent label-flip probability, in `[0, 1/2)`.
    pub noise: f64,
    pub seed: u64,
}

impl SourceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("dimension n must be at least 1"));
        }
        if !(0.0..0.5).contains(&self.noise) {
            return Err(Error::invalid(format!(
                "noise rate {} outside [0, 1/2)",
                self.noise
            )));
        }
        match &self.rule {
            LabelRule::AxisThreshold { theta } => {
                if !(*theta > 0.0 && *theta < 1.0) {
                    return Err(Error::invalid(format!("theta {theta} must lie in (0,1)")));
                }
            }
            LabelRule::Halfspace { normal, offset } => {
                if normal.len() != self.n {
                    return Err(Error::DimensionMismatch {
                        expected: self.n,
                        got: normal.len(),
                    });
                }
                let lo: f64 = normal.iter().map(|a| a.min(0.0)).sum();
                let hi: f64 = normal.iter().map(|a| a.max(0.0)).sum();
                if !(lo < *offset && *offset < hi) {
                    return Err(Error::invalid(
                        "halfspace boundary does not cross the open unit cube",
                    ));
                }
            }
            LabelRule::Checker { k } => {
                if *k < 2 {
                    return Err(Error::invalid("checker needs k >= 2"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Sample {
    pub dataset: Dataset,
    /// Number of labels flipped by noise.
    pub flipped: usize,
    /// All drawn labels are identical.
    pub degenerate: bool,
}

/// `m` i.i.d. draws: uniform features, rule label, independent flips.
pub fn sample_dataset(spec: &SourceSpec, m: usize) -> Result<Sample> {
    spec.validate()?;
    if m < 2 {
        return Err(Error::invalid(format!("need m >= 2, got {m}")));
    }
    let mut rng = stream_rng(spec.seed, Stream::Sampling);
    let mut flipped = 0;
    let examples: Vec<Example> = (0..m)
        .map(|_| {
            let x: Vec<f64> = (0..spec.n).map(|_| rng.random::<f64>()).collect();
            let mut y = spec.rule.label(&x);
            if spec.noise > 0.0 && rng.random::<f64>() < spec.noise {
                y = y.flip();
                flipped += 1;
            }
            Example::new(x, y)
        })
        .collect();
    let degenerate = examples.iter().all(|e| e.label == examples[0].label);
    Ok(Sample {
        dataset: Dataset::new(examples)?,
        flipped,
        degenerate,
    })
}

/// Writes `x1,…,xn,y` rows; floats use the shortest exact representation.
pub fn write_csv(data: &Dataset, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=data.n()).map(|i| format!("x{i}")).collect();
    header.push("y".into());
    w.write_record(&header).map_err(csv_io)?;
    for ex in data.examples() {
        let mut row: Vec<String> = ex.features.iter().map(|v| v.to_string()).collect();
        row.push(ex.label.value().to_string());
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn save_csv(data: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(data, std::io::BufWriter::new(file))
}

pub fn read_csv(input: impl Read, path: &Path) -> Result<Dataset> {
    let fail = |line: u64, message: String| Error::Csv {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header = r.headers().map_err(|e| fail(1, e.to_string()))?.clone();
    let cols = header.len();
    let well_formed = cols >= 2
        && header.get(cols - 1).map(str::trim) == Some("y")
        && header
            .iter()
            .take(cols - 1)
            .enumerate()
            .all(|(i, h)| h.trim() == format!("x{}", i + 1));
    if !well_formed {
        return Err(fail(1, "header must be x1,...,xn,y".into()));
    }
    let n = cols - 1;
    let mut examples = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            fail(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != cols {
            return Err(fail(
                line,
                format!("expected {cols} fields, found {}", record.len()),
            ));
        }
        let mut features = Vec::with_capacity(n);
        for field in record.iter().take(n) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| fail(line, format!("feature {field:?} is not a number")))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(fail(line, format!("feature value {v} outside [0,1]")));
            }
            features.push(v);
        }
        let raw = record[n].trim();
        let label = raw
            .parse::<i64>()
            .ok()
            .and_then(Sign::from_i64)
            .ok_or_else(|| fail(line, format!("label {raw:?} is not -1 or 1")))?;
        examples.push(Example::new(features, label));
    }
    Dataset::new(examples).map_err(|e| fail(0, e.to_string()))
}

pub fn load_csv(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(file), path)
}

/// SHA-256 of the dataset's CSV serialization, hex encoded.
pub fn dataset_hash(data: &Dataset) -> String {
    let mut bytes = Vec::new();
    write_csv(data, &mut bytes).expect("writing to memory cannot fail");
    hex::encode(Sha256::digest(&bytes))
}
