//! JSON-lines run traces: one header line, one line per emitted round, and
//! a closing summary line.
//!
//! ```text
//! {"header":{...}}
//! {"t":1,"stump_id":0,"epsilon":"1/3","alpha":3.4657359027997264e-1,...}
//! {"summary":{...}}
//! ```

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::engine::{RoundRecord, RunConfig, RunSummary};
use crate::error::{Error, Result};

pub const TOOL_NAME: &str = "optboost";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub tool: String,
    pub version: String,
    pub dataset_hash: String,
    pub m: usize,
    pub n: usize,
    pub backend: crate::weights::Backend,
    pub seed: u64,
    pub tie_tolerance: f64,
    pub generated_size: usize,
    pub effective_size: usize,
    pub config: RunConfig,
}

impl TraceHeader {
    pub fn new(
        dataset_hash: String,
        m: usize,
        n: usize,
        config: &RunConfig,
        generated: usize,
        effective: usize,
    ) -> Self {
        TraceHeader {
            tool: TOOL_NAME.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            dataset_hash,
            m,
            n,
            backend: config.backend,
            seed: config.seed,
            tie_tolerance: config.tie_tolerance,
            generated_size: generated,
            effective_size: effective,
            config: config.clone(),
        }
    }
}

#[derive(Serialize)]
struct HeaderLine<'a> {
    header: &'a TraceHeader,
}

#[derive(Serialize)]
struct SummaryLine<'a> {
    summary: &'a RunSummary,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Line {
    Header { header: TraceHeader },
    Summary { summary: RunSummary },
    Round(RoundRecord),
}

/// Streams a trace to any writer.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W, header: &TraceHeader) -> Result<Self> {
        serde_json::to_writer(&mut out, &HeaderLine { header })?;
        out.write_all(b"\n")?;
        Ok(TraceWriter { out })
    }

    pub fn record(&mut self, record: &RoundRecord) -> Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self, summary: &RunSummary) -> Result<W> {
        serde_json::to_writer(&mut self.out, &SummaryLine { summary })?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(self.out)
    }
}

/// A parsed trace.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<RoundRecord>,
    pub summary: Option<RunSummary>,
}

impl Trace {
    pub fn read(input: impl BufRead) -> Result<Trace> {
        let mut header = None;
        let mut records: Vec<RoundRecord> = Vec::new();
        let mut summary = None;
        for (k, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = k + 1;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(&line).map_err(|e| Error::Trace {
                line: lineno,
                message: e.to_string(),
            })?;
            let fail = |message: &str| Error::Trace {
                line: lineno,
                message: message.to_string(),
            };
            match parsed {
                Line::Header { header: h } => {
                    if header.is_some() || !records.is_empty() {
                        return Err(fail("header must be the first line"));
                    }
                    header = Some(h);
                }
                Line::Round(r) => {
                    if header.is_none() {
                        return Err(fail("round record before header"));
                    }
                    if summary.is_some() {
                        return Err(fail("round record after summary"));
                    }
                    if records.last().is_some_and(|prev| prev.t >= r.t) {
                        return Err(fail("round indices must increase"));
                    }
                    records.push(r);
                }
                Line::Summary { summary: s } => {
                    if summary.is_some() {
                        return Err(fail("duplicate summary"));
                    }
                    summary = Some(s);
                }
            }
        }
        let header = header.ok_or(Error::Trace {
            line: 0,
            message: "missing header line".into(),
        })?;
        Ok(Trace {
            header,
            records,
            summary,
        })
    }

    pub fn read_path(path: &std::path::Path) -> Result<Trace> {
        let file = std::fs::File::open(path)?;
        Trace::read(std::io::BufReader::new(file))
    }

    /// True when every round `1..=T` has a record.
    pub fn is_complete(&self) -> bool {
        self.records
            .iter()
            .enumerate()
            .all(|(k, r)| r.t == k as u64 + 1)
    }
}
