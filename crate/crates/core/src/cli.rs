//! The `optboost` command line: `gen`, `stumps`, `boost` and `analyze`.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 degenerate data
//! (a perfect stump exists), 4 a boosting run halted before its last round.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::datagen::{dataset_hash, load_csv, sample_dataset, save_csv, LabelRule, SourceSpec};
use crate::domain::{Dataset, Stump};
use crate::dynamics::{
    boundary_report, detect_cycle, fit_log_growth, tie_report, time_averages, unique_growth_curve,
    write_curve_csv, BoundaryMethod, BoundaryOptions, WeightedStump, DEFAULT_CONVERGENCE_DELTA,
};
use crate::engine::{
    checkpoints, run_on_inventory, HaltReason, InitMode, RecordMode, RunConfig, DEFAULT_BIT_CAP,
};
use crate::error::{Error, Result};
use crate::stumps::{
    class_size_bound, enumerate_midpoint_stumps, GeneratedClass, HypothesisInventory,
    DEFAULT_TIE_TOLERANCE,
};
use crate::trace::{Trace, TraceHeader, TraceWriter};
use crate::weights::Backend;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DEGENERATE: u8 = 3;
pub const EXIT_HALTED: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "optboost",
    version,
    about = "Optimal AdaBoost with decision stumps as a dynamical system"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic dataset and write it as CSV.
    Gen(GenArgs),
    /// Report the sizes of the generated and effective stump classes.
    Stumps(StumpsArgs),
    /// Run boosting and write a JSON-lines trace.
    Boost(BoostArgs),
    /// Compute a report from a trace.
    Analyze(AnalyzeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RuleKind {
    Axis,
    Halfspace,
    Checker,
}

#[derive(Debug, clap::Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub rule: RuleKind,
    /// Threshold on x1 for the axis rule.
    #[arg(long, default_value_t = 0.5)]
    pub theta: f64,
    /// Comma-separated halfspace normal; all ones by default.
    #[arg(long, value_delimiter = ',')]
    pub normal: Option<Vec<f64>>,
    /// Halfspace offset; defaults to the value through the cube's center.
    #[arg(long)]
    pub offset: Option<f64>,
    /// Checker cells per axis.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Label-flip probability in [0, 1/2).
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct StumpsArgs {
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct BoostArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub rounds: u64,
    #[arg(long, value_enum, default_value_t = Backend::Rational)]
    pub backend: Backend,
    #[arg(long, value_enum, default_value_t = InitMode::SimplexUniform)]
    pub init: InitMode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_TIE_TOLERANCE)]
    pub tie_tol: f64,
    #[arg(long, default_value_t = DEFAULT_BIT_CAP)]
    pub bit_cap: u64,
    #[arg(long, default_value_t = 2.0)]
    pub checkpoint_ratio: f64,
    /// Emit every round, or only geometric checkpoints.
    #[arg(long, value_enum, default_value_t = RecordMode::All)]
    pub records: RecordMode,
    /// Attach weight snapshots to the last N rounds.
    #[arg(long, default_value_t = 0)]
    pub snapshot_tail: u64,
    /// Trace path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run seeds `seed..seed+k` concurrently, writing `<out>.rep<i>` traces.
    #[arg(long, default_value_t = 1)]
    pub replicates: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportKind {
    Ties,
    UniqueGrowth,
    Averages,
    Cycle,
    Boundary,
}

#[derive(Debug, clap::Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long, value_enum)]
    pub report: ReportKind,
    /// Dataset CSV, needed for margins in the averages report.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = BoundaryMethod::ExactCells)]
    pub method: BoundaryMethod,
    /// Absolute ambiguity threshold; defaults to 1e-9 times the total vote weight.
    #[arg(long)]
    pub tau_f: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub tau_cycle: f64,
    #[arg(long, default_value_t = 50)]
    pub p_max: usize,
    #[arg(long, default_value_t = 50)]
    pub window: usize,
    #[arg(long, default_value_t = DEFAULT_CONVERGENCE_DELTA)]
    pub delta_conv: f64,
    /// Also write the unique-growth curve as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` and runs the command, printing errors to stderr.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

/// Runs a parsed command and returns its exit code.
pub fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Gen(args) => cmd_gen(&args),
        Command::Stumps(args) => cmd_stumps(&args, &mut io::stdout().lock()),
        Command::Boost(args) => cmd_boost(&args),
        Command::Analyze(args) => cmd_analyze(&args),
    }
}

pub fn cmd_gen(args: &GenArgs) -> Result<u8> {
    let rule = match args.rule {
        RuleKind::Axis => LabelRule::AxisThreshold { theta: args.theta },
        RuleKind::Halfspace => {
            let normal = args.normal.clone().unwrap_or_else(|| vec![1.0; args.n]);
            let offset = args
                .offset
                .unwrap_or_else(|| normal.iter().sum::<f64>() / 2.0);
            LabelRule::Halfspace { normal, offset }
        }
        RuleKind::Checker => LabelRule::Checker { k: args.k },
    };
    let spec = SourceSpec {
        n: args.n,
        rule,
        noise: args.noise,
        seed: args.seed,
    };
    let sample = sample_dataset(&spec, args.m)?;
    save_csv(&sample.dataset, &args.out)?;
    if sample.degenerate {
        eprintln!("warning: every sampled label is the same; the dataset has a perfect stump");
        return Ok(EXIT_DEGENERATE);
    }
    Ok(0)
}

#[derive(Serialize)]
struct StumpsReport {
    #[serde(rename = "H")]
    generated: usize,
    #[serde(rename = "E")]
    effective: usize,
    bound: usize,
    thresholds_per_feature: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    perfect_stump: Option<Stump>,
}

pub fn cmd_stumps(args: &StumpsArgs, out: &mut impl Write) -> Result<u8> {
    let data = load_csv(&args.data)?;
    let (report, code) = stumps_report(&data);
    serde_json::to_writer(&mut *out, &report)?;
    writeln!(out)?;
    Ok(code)
}

fn stumps_report(data: &Dataset) -> (StumpsReport, u8) {
    let bound = class_size_bound(data.n(), data.m());
    match HypothesisInventory::build(data) {
        Ok(inv) => (
            StumpsReport {
                generated: inv.generated_len(),
                effective: inv.effective_len(),
                bound,
                thresholds_per_feature: inv.thresholds_per_feature(),
                perfect_stump: None,
            },
            0,
        ),
        Err(_) => {
            // A stump without mistakes dominates every other stump.
            let raw = enumerate_midpoint_stumps(data);
            let class = GeneratedClass::close(&raw, data);
            let mut per_feature = vec![0; data.n()];
            for h in class.stumps() {
                if let Stump::Threshold { feature, .. } = h {
                    per_feature[*feature] += 1;
                }
            }
            for c in &mut per_feature {
                *c /= 2;
            }
            (
                StumpsReport {
                    generated: class.len(),
                    effective: 1,
                    bound,
                    thresholds_per_feature: per_feature,
                    perfect_stump: class.perfect_stump(),
                },
                EXIT_DEGENERATE,
            )
        }
    }
}

fn replicate_path(out: &Path, i: u64) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}.rep{i}.{}", ext.to_string_lossy()),
        None => format!("{stem}.rep{i}"),
    };
    out.with_file_name(name)
}

pub fn cmd_boost(args: &BoostArgs) -> Result<u8> {
    let data = load_csv(&args.data)?;
    let hash = dataset_hash(&data);
    let config = RunConfig {
        rounds: args.rounds,
        backend: args.backend,
        init: args.init,
        seed: args.seed,
        tie_tolerance: args.tie_tol,
        bit_cap: args.bit_cap,
        checkpoint_ratio: args.checkpoint_ratio,
        record_mode: args.records,
        snapshot_tail: args.snapshot_tail,
    };
    config.validate()?;
    let inv = match HypothesisInventory::build(&data) {
        Ok(inv) => inv,
        Err(Error::PerfectStump(h)) => {
            eprintln!("degenerate data: perfect stump {h}; boosting stops before round one");
            return Ok(EXIT_DEGENERATE);
        }
        Err(e) => return Err(e),
    };

    if args.replicates == 0 {
        return Err(Error::invalid("--replicates must be at least 1"));
    }
    if args.replicates == 1 {
        return match &args.out {
            Some(path) => boost_to(
                &inv,
                &data,
                &hash,
                &config,
                BufWriter::new(File::create(path)?),
            ),
            None => boost_to(
                &inv,
                &data,
                &hash,
                &config,
                BufWriter::new(io::stdout().lock()),
            ),
        };
    }
    let out = args
        .out
        .as_ref()
        .ok_or_else(|| Error::invalid("--replicates above 1 needs --out"))?;
    let results: Vec<Result<u8>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..args.replicates)
            .map(|i| {
                let config = RunConfig {
                    seed: args.seed.wrapping_add(i),
                    ..config.clone()
                };
                let (inv, data, hash) = (&inv, &data, &hash);
                let path = replicate_path(out, i);
                scope.spawn(move || {
                    boost_to(
                        inv,
                        data,
                        hash,
                        &config,
                        BufWriter::new(File::create(path)?),
                    )
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("replicate thread panicked"))
            .collect()
    });
    let mut code = 0;
    for r in results {
        code = code.max(r?);
    }
    Ok(code)
}

fn boost_to(
    inv: &HypothesisInventory,
    data: &Dataset,
    hash: &str,
    config: &RunConfig,
    out: impl Write,
) -> Result<u8> {
    let header = TraceHeader::new(
        hash.to_string(),
        data.m(),
        data.n(),
        config,
        inv.generated_len(),
        inv.effective_len(),
    );
    let mut writer = TraceWriter::new(out, &header)?;
    let summary = run_on_inventory(inv, config, |r| writer.record(&r))?;
    writer.finish(&summary)?;
    Ok(match summary.halt_reason {
        HaltReason::Completed => 0,
        HaltReason::PerfectStump => EXIT_DEGENERATE,
        other => {
            eprintln!(
                "run halted: {other:?} after {} of {} rounds",
                summary.rounds_completed, config.rounds
            );
            EXIT_HALTED
        }
    })
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<u8> {
    let trace = Trace::read_path(&args.trace)?;
    match &args.out {
        Some(path) => {
            let mut out = BufWriter::new(File::create(path)?);
            analyze(args, &trace, &mut out)?;
            out.flush()?;
        }
        None => analyze(args, &trace, &mut io::stdout().lock())?,
    }
    Ok(0)
}

fn write_report(out: &mut impl Write, report: &impl Serialize) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, report)?;
    writeln!(out)?;
    Ok(())
}

fn analyze(args: &AnalyzeArgs, trace: &Trace, out: &mut impl Write) -> Result<()> {
    let records = &trace.records;
    match args.report {
        ReportKind::Ties => write_report(out, &tie_report(records)?),
        ReportKind::UniqueGrowth => {
            let last = records.last().map_or(0, |r| r.t);
            let marks: Vec<u64> = match trace.header.config.record_mode {
                RecordMode::All => checkpoints(last, trace.header.config.checkpoint_ratio),
                RecordMode::Checkpoints => checkpoints(
                    trace.header.config.rounds,
                    trace.header.config.checkpoint_ratio,
                )
                .into_iter()
                .filter(|&t| t <= last)
                .collect(),
            };
            let curve = unique_growth_curve(records, &marks)?;
            if let Some(path) = &args.csv {
                let mut f = BufWriter::new(File::create(path)?);
                write_curve_csv(&curve, &mut f)?;
                f.flush()?;
            }
            write_report(
                out,
                &fit_log_growth(&curve, Some(trace.header.effective_size))?,
            )
        }
        ReportKind::Averages => {
            let inv = match &args.data {
                Some(path) => {
                    let data = load_csv(path)?;
                    if dataset_hash(&data) != trace.header.dataset_hash {
                        return Err(Error::invalid(format!(
                            "{} does not match the trace's dataset hash",
                            path.display()
                        )));
                    }
                    Some(HypothesisInventory::build(&data)?)
                }
                None => None,
            };
            write_report(out, &time_averages(records, inv.as_ref(), args.delta_conv)?)
        }
        ReportKind::Cycle => {
            let snaps: Vec<(u64, &Vec<f64>)> = records
                .iter()
                .filter_map(|r| r.weights.as_ref().map(|w| (r.t, w)))
                .collect();
            let first = snaps.first().map(|s| s.0).ok_or_else(|| {
                Error::invalid("trace has no weight snapshots; rerun boost with --snapshot-tail")
            })?;
            if snaps
                .iter()
                .enumerate()
                .any(|(k, s)| s.0 != first + k as u64)
            {
                return Err(Error::invalid(
                    "weight snapshots are not on consecutive rounds",
                ));
            }
            let snapshots: Vec<Vec<f64>> = snaps.into_iter().map(|s| s.1.clone()).collect();
            write_report(
                out,
                &detect_cycle(&snapshots, first, args.tau_cycle, args.p_max, args.window)?,
            )
        }
        ReportKind::Boundary => {
            let summary = trace.summary.as_ref().ok_or_else(|| {
                Error::invalid("trace has no summary line; the run did not finish writing")
            })?;
            let stumps: Vec<WeightedStump> = summary
                .selected
                .iter()
                .map(|s| WeightedStump::new(s.stump, s.alpha))
                .collect();
            let opts = BoundaryOptions {
                method: args.method,
                tau_f: args.tau_f,
                samples: args.samples,
                seed: args.seed,
            };
            write_report(out, &boundary_report(&stumps, trace.header.n, &opts)?)
        }
    }
}
