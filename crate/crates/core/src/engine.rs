//! The Optimal AdaBoost loop over the example-weight simplex.

use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, Stump};
use crate::error::{Error, Result};
use crate::num::{self, Num};
use crate::rng::{stream_rng, Stream};
use crate::stumps::{select_optimal, HypothesisInventory, Selection, DEFAULT_TIE_TOLERANCE};
use crate::weights::{Arithmetic, Backend, Exact, Float, WeightState};

pub const DEFAULT_BIT_CAP: u64 = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    /// `w(l) = 1/m`.
    UniformPoint,
    /// A uniform draw from the simplex.
    SimplexUniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum RecordMode {
    /// A record for every round.
    All,
    /// Records only at geometric checkpoints (plus the snapshot tail).
    Checkpoints,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HaltReason {
    Completed,
    NoEdge,
    PerfectStump,
    Underflow,
    RationalBitCap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub rounds: u64,
    pub backend: Backend,
    pub init: InitMode,
    pub seed: u64,
    pub tie_tolerance: f64,
    pub bit_cap: u64,
    pub checkpoint_ratio: f64,
    pub record_mode: RecordMode,
    /// Number of final rounds whose records carry a weight snapshot.
    pub snapshot_tail: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            rounds: 100,
            backend: Backend::Rational,
            init: InitMode::SimplexUniform,
            seed: 0,
            tie_tolerance: DEFAULT_TIE_TOLERANCE,
            bit_cap: DEFAULT_BIT_CAP,
            checkpoint_ratio: 2.0,
            record_mode: RecordMode::All,
            snapshot_tail: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds < 1 {
            return Err(Error::invalid("rounds must be at least 1"));
        }
        if self.checkpoint_ratio.is_nan() || self.checkpoint_ratio <= 1.0 {
            return Err(Error::invalid("checkpoint ratio must exceed 1"));
        }
        if self.tie_tolerance.is_nan() || self.tie_tolerance < 0.0 {
            return Err(Error::invalid("tie tolerance must be non-negative"));
        }
        if self.bit_cap == 0 {
            return Err(Error::invalid("bit cap must be positive"));
        }
        Ok(())
    }
}

/// Per-round trace entry. Example-level data is 1-based when displayed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: u64,
    /// Canonical rank of the selected stump in the generated class.
    pub stump_id: usize,
    pub epsilon: Num,
    #[serde(serialize_with = "num::f64_17::serialize")]
    pub alpha: f64,
    pub tie_size: usize,
    pub tie_agreement: bool,
    pub disagreement_mass: Num,
    pub unique_count: usize,
    /// `w_t` when snapshotting is on for this round.
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        serialize_with = "num::opt_vec_f64_17::serialize"
    )]
    pub weights: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectedStump {
    pub stump_id: usize,
    pub stump: Stump,
    #[serde(serialize_with = "num::f64_17::serialize")]
    pub alpha: f64,
}

/// End-of-run summary; the last line of a trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub halt_reason: HaltReason,
    pub rounds_completed: u64,
    pub generated_size: usize,
    pub effective_size: usize,
    pub unique_count: usize,
    #[serde(serialize_with = "num::f64_17::serialize")]
    pub alpha_sum: f64,
    /// Cumulative α per distinct selected stump, by ascending stump id.
    pub selected: Vec<SelectedStump>,
    pub final_weights: Vec<Num>,
}

impl RunSummary {
    pub fn selected_alphas(&self) -> BTreeMap<usize, f64> {
        self.selected
            .iter()
            .map(|s| (s.stump_id, s.alpha))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoostRun {
    pub records: Vec<RoundRecord>,
    pub summary: RunSummary,
}

/// Initial weights `w_1`.
pub fn init_weights<A: Arithmetic>(m: usize, mode: InitMode, seed: u64) -> Result<WeightState<A>> {
    if m < 2 {
        return Err(Error::invalid(format!("need m >= 2, got {m}")));
    }
    match mode {
        InitMode::UniformPoint => A::uniform_state(m),
        InitMode::SimplexUniform => A::simplex_state(&simplex_point(m, seed)),
    }
}

/// Normalized i.i.d. standard exponentials: a uniform point on the simplex.
pub fn simplex_point(m: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, Stream::InitWeights);
    let draws: Vec<f64> = (0..m)
        .map(|_| loop {
            let e: f64 = rng.sample(Exp1);
            if e > 0.0 {
                break e;
            }
        })
        .collect();
    let sum: f64 = draws.iter().sum();
    draws.into_iter().map(|e| e / sum).collect()
}

/// One completed round.
#[derive(Clone, Debug)]
pub struct Round<A: Arithmetic> {
    pub selection: Selection<A>,
    pub alpha: f64,
    pub tie_agreement: bool,
    pub disagreement_mass: Num,
    pub next: WeightState<A>,
}

/// Selects `h_t` at `w` and applies the exponential-loss update.
///
/// Returns the halt reason instead when the round cannot complete.
pub fn boost_round<A: Arithmetic>(
    inv: &HypothesisInventory,
    w: &WeightState<A>,
    tie_tolerance: f64,
) -> Result<std::result::Result<Round<A>, HaltReason>> {
    let selection = select_optimal(inv, w, tie_tolerance)?;
    if A::is_zero(&selection.error) {
        return Ok(Err(HaltReason::PerfectStump));
    }
    let correct = A::sub(w.total(), &selection.error);
    if selection.error >= correct {
        return Ok(Err(HaltReason::NoEdge));
    }
    let alpha = 0.5 * A::ln_ratio(&correct, &selection.error);

    let (tie_agreement, disagreement_mass) = tie_disagreement(inv, w, &selection.tie_set);

    let mut next = w.clone();
    let mistakes = inv.effective_mistakes(selection.chosen);
    if A::reweight(&mut next, mistakes, &selection.error).is_err() {
        return Ok(Err(HaltReason::Underflow));
    }
    Ok(Ok(Round {
        selection,
        alpha,
        tie_agreement,
        disagreement_mass,
        next,
    }))
}

/// Whether all tied stumps share one mistake vector, and the largest weight
/// on which any two tied stumps disagree.
fn tie_disagreement<A: Arithmetic>(
    inv: &HypothesisInventory,
    w: &WeightState<A>,
    tie_set: &[usize],
) -> (bool, Num) {
    let mut best = A::zero();
    let mut agree = true;
    for (k, &a) in tie_set.iter().enumerate() {
        for &b in &tie_set[k + 1..] {
            let diff = inv
                .effective_mistakes(a)
                .symmetric_difference(inv.effective_mistakes(b));
            if diff.is_empty() {
                continue;
            }
            agree = false;
            let mass = w.mass_of(&diff);
            if mass > best {
                best = mass;
            }
        }
    }
    (agree, A::ratio(&best, w.total()))
}

/// Geometric checkpoints `1, ⌈r⌉, ⌈r²⌉, …` up to and including `rounds`.
pub fn checkpoints(rounds: u64, ratio: f64) -> Vec<u64> {
    let mut out = vec![];
    let mut t = 1u64;
    let mut x = 1.0f64;
    while t < rounds {
        out.push(t);
        x *= ratio;
        t = (x.ceil() as u64).max(t + 1);
    }
    out.push(rounds);
    out
}

/// Drives the loop, handing each emitted record to `sink`.
pub struct Engine<'a, A: Arithmetic> {
    inv: &'a HypothesisInventory,
    config: &'a RunConfig,
    state: WeightState<A>,
    t: u64,
    unique: HashSet<usize>,
    alphas: BTreeMap<usize, f64>,
    alpha_sum: f64,
}

impl<'a, A: Arithmetic> Engine<'a, A> {
    pub fn new(
        inv: &'a HypothesisInventory,
        config: &'a RunConfig,
        init: WeightState<A>,
    ) -> Result<Self> {
        config.validate()?;
        if init.m() != inv.m() {
            return Err(Error::LengthMismatch {
                expected: inv.m(),
                got: init.m(),
            });
        }
        Ok(Engine {
            inv,
            config,
            state: init,
            t: 0,
            unique: HashSet::new(),
            alphas: BTreeMap::new(),
            alpha_sum: 0.0,
        })
    }

    pub fn weights(&self) -> &WeightState<A> {
        &self.state
    }

    /// Runs to completion or halt.
    pub fn run(mut self, mut sink: impl FnMut(RoundRecord) -> Result<()>) -> Result<RunSummary> {
        let rounds = self.config.rounds;
        let marks: HashSet<u64> = match self.config.record_mode {
            RecordMode::All => HashSet::new(),
            RecordMode::Checkpoints => checkpoints(rounds, self.config.checkpoint_ratio)
                .into_iter()
                .collect(),
        };
        let snapshot_from = rounds.saturating_sub(self.config.snapshot_tail) + 1;
        let mut halt = HaltReason::Completed;
        while self.t < rounds {
            let t = self.t + 1;
            let snapshot =
                (t >= snapshot_from && self.config.snapshot_tail > 0).then(|| self.state.to_f64());
            let round = match boost_round(self.inv, &self.state, self.config.tie_tolerance)? {
                Ok(round) => round,
                Err(reason) => {
                    halt = reason;
                    break;
                }
            };
            self.t = t;
            let stump_id = self.inv.effective_rank(round.selection.chosen);
            self.unique.insert(stump_id);
            *self.alphas.entry(stump_id).or_insert(0.0) += round.alpha;
            self.alpha_sum += round.alpha;
            let emit = self.config.record_mode == RecordMode::All
                || marks.contains(&t)
                || snapshot.is_some();
            if emit {
                sink(RoundRecord {
                    t,
                    stump_id,
                    epsilon: round.selection.epsilon,
                    alpha: round.alpha,
                    tie_size: round.selection.tie_set.len(),
                    tie_agreement: round.tie_agreement,
                    disagreement_mass: round.disagreement_mass,
                    unique_count: self.unique.len(),
                    weights: snapshot,
                })?;
            }
            self.state = round.next;
            if A::precision_bits(&self.state) > self.config.bit_cap {
                halt = HaltReason::RationalBitCap;
                break;
            }
        }
        let selected = self
            .alphas
            .iter()
            .map(|(&stump_id, &alpha)| SelectedStump {
                stump_id,
                stump: self
                    .inv
                    .stump(stump_id)
                    .expect("selected id is in the class"),
                alpha,
            })
            .collect();
        Ok(RunSummary {
            halt_reason: halt,
            rounds_completed: self.t,
            generated_size: self.inv.generated_len(),
            effective_size: self.inv.effective_len(),
            unique_count: self.unique.len(),
            alpha_sum: self.alpha_sum,
            selected,
            final_weights: self.state.weights(),
        })
    }
}

/// Runs boosting on a prebuilt inventory, streaming records to `sink`.
pub fn run_on_inventory(
    inv: &HypothesisInventory,
    config: &RunConfig,
    sink: impl FnMut(RoundRecord) -> Result<()>,
) -> Result<RunSummary> {
    match config.backend {
        Backend::Rational => {
            let init = init_weights::<Exact>(inv.m(), config.init, config.seed)?;
            Engine::new(inv, config, init)?.run(sink)
        }
        Backend::Float => {
            let init = init_weights::<Float>(inv.m(), config.init, config.seed)?;
            Engine::new(inv, config, init)?.run(sink)
        }
    }
}

/// Builds the inventory and runs boosting, keeping every emitted record.
///
/// Data with a perfect stump yields an empty run halted with
/// [`HaltReason::PerfectStump`].
pub fn run_boost(data: &Dataset, config: &RunConfig) -> Result<BoostRun> {
    config.validate()?;
    let inv = match HypothesisInventory::build(data) {
        Ok(inv) => inv,
        Err(Error::PerfectStump(h)) => return Ok(perfect_stump_run(data, config, h)),
        Err(e) => return Err(e),
    };
    let mut records = Vec::new();
    let summary = run_on_inventory(&inv, config, |r| {
        records.push(r);
        Ok(())
    })?;
    Ok(BoostRun { records, summary })
}

fn perfect_stump_run(data: &Dataset, config: &RunConfig, _h: Stump) -> BoostRun {
    let final_weights = match config.backend {
        Backend::Rational => {
            init_weights::<Exact>(data.m(), config.init, config.seed).map(|w| w.weights())
        }
        Backend::Float => {
            init_weights::<Float>(data.m(), config.init, config.seed).map(|w| w.weights())
        }
    }
    .unwrap_or_default();
    BoostRun {
        records: Vec::new(),
        summary: RunSummary {
            halt_reason: HaltReason::PerfectStump,
            rounds_completed: 0,
            generated_size: 0,
            effective_size: 0,
            unique_count: 0,
            alpha_sum: 0.0,
            selected: Vec::new(),
            final_weights,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Sign;
    use num_rational::BigRational;

    fn d3() -> Dataset {
        Dataset::from_rows(vec![vec![0.1], vec![0.5], vec![0.9]], &[1, -1, 1]).unwrap()
    }

    fn q(p: i64, d: i64) -> BigRational {
        BigRational::new(p.into(), d.into())
    }

    fn exact_config(rounds: u64) -> RunConfig {
        RunConfig {
            rounds,
            backend: Backend::Rational,
            init: InitMode::UniformPoint,
            ..RunConfig::default()
        }
    }

    #[test]
    fn init_uniform_point() {
        let w = init_weights::<Exact>(3, InitMode::UniformPoint, 0).unwrap();
        assert_eq!(w.to_rationals(), vec![q(1, 3); 3]);
        assert!(init_weights::<Exact>(1, InitMode::UniformPoint, 0).is_err());
    }

    #[test]
    fn init_simplex_is_seeded() {
        let a = init_weights::<Float>(3, InitMode::SimplexUniform, 11).unwrap();
        let b = init_weights::<Float>(3, InitMode::SimplexUniform, 11).unwrap();
        let c = init_weights::<Float>(3, InitMode::SimplexUniform, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let e = init_weights::<Exact>(3, InitMode::SimplexUniform, 11).unwrap();
        assert_eq!(e.to_rationals().iter().sum::<BigRational>(), q(1, 1));
    }

    #[test]
    fn d3_hand_trace_three_rounds() {
        let inv = HypothesisInventory::build(&d3()).unwrap();
        let mut w = init_weights::<Exact>(3, InitMode::UniformPoint, 0).unwrap();
        let expected = [
            (
                Stump::Constant(Sign::Pos),
                q(1, 3),
                2.0f64,
                vec![q(1, 4), q(1, 2), q(1, 4)],
            ),
            (
                Stump::threshold(0, 0.3, Sign::Neg),
                q(1, 4),
                3.0,
                vec![q(1, 6), q(1, 3), q(1, 2)],
            ),
            (
                Stump::threshold(0, 0.7, Sign::Pos),
                q(1, 6),
                5.0,
                vec![q(1, 2), q(1, 5), q(3, 10)],
            ),
        ];
        for (h, eps, odds, next) in expected {
            let round = boost_round(&inv, &w, DEFAULT_TIE_TOLERANCE)
                .unwrap()
                .unwrap();
            assert_eq!(round.selection.stump, h);
            assert_eq!(round.selection.epsilon, Num::Exact(eps));
            assert!((round.alpha - 0.5 * odds.ln()).abs() < 1e-15);
            assert_eq!(round.next.to_rationals(), next);
            w = round.next;
        }
    }

    #[test]
    fn d3_six_rounds_rotate() {
        let run = run_boost(&d3(), &exact_config(6)).unwrap();
        let eps: Vec<Num> = run.records.iter().map(|r| r.epsilon.clone()).collect();
        assert_eq!(
            eps,
            vec![
                Num::ratio(1, 3),
                Num::ratio(1, 4),
                Num::ratio(1, 6),
                Num::ratio(1, 5),
                Num::ratio(3, 16),
                Num::ratio(5, 26)
            ]
        );
        let ids: Vec<usize> = run.records.iter().map(|r| r.stump_id).collect();
        assert_eq!(ids[..3], ids[3..]);
        assert_eq!(run.summary.unique_count, 3);
        assert_eq!(run.summary.halt_reason, HaltReason::Completed);
    }

    #[test]
    fn single_round_selects_one_stump() {
        let run = run_boost(&d3(), &exact_config(1)).unwrap();
        assert_eq!(run.records.len(), 1);
        assert_eq!(run.records[0].unique_count, 1);
    }

    #[test]
    fn alpha_bookkeeping() {
        let run = run_boost(&d3(), &exact_config(20)).unwrap();
        let per_round: f64 = run.records.iter().map(|r| r.alpha).sum();
        let per_stump: f64 = run.summary.selected.iter().map(|s| s.alpha).sum();
        assert!((per_round - per_stump).abs() < 1e-12);
        assert!((per_round - run.summary.alpha_sum).abs() < 1e-12);
    }

    #[test]
    fn bit_cap_halts() {
        let config = RunConfig {
            bit_cap: 16,
            ..exact_config(1000)
        };
        let run = run_boost(&d3(), &config).unwrap();
        assert_eq!(run.summary.halt_reason, HaltReason::RationalBitCap);
        assert!(run.summary.rounds_completed < 1000);
    }

    #[test]
    fn perfect_data_halts_immediately() {
        let d = Dataset::from_rows(vec![vec![0.2], vec![0.4]], &[-1, 1]).unwrap();
        let run = run_boost(&d, &exact_config(5)).unwrap();
        assert_eq!(run.summary.halt_reason, HaltReason::PerfectStump);
        assert!(run.records.is_empty());
    }

    #[test]
    fn no_edge_halts() {
        // Two identical points with opposite labels: every stump errs on one.
        let d = Dataset::from_rows(vec![vec![0.5], vec![0.5]], &[1, -1]).unwrap();
        let run = run_boost(&d, &exact_config(5)).unwrap();
        assert_eq!(run.summary.halt_reason, HaltReason::NoEdge);
        assert_eq!(run.summary.rounds_completed, 0);
    }

    #[test]
    fn checkpoint_schedule() {
        assert_eq!(checkpoints(1, 2.0), vec![1]);
        assert_eq!(checkpoints(10, 2.0), vec![1, 2, 4, 8, 10]);
        assert_eq!(checkpoints(8, 2.0), vec![1, 2, 4, 8]);
        assert_eq!(checkpoints(5, 1.1), vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn checkpoint_mode_keeps_unique_counts() {
        let config = RunConfig {
            record_mode: RecordMode::Checkpoints,
            snapshot_tail: 2,
            ..exact_config(10)
        };
        let run = run_boost(&d3(), &config).unwrap();
        let ts: Vec<u64> = run.records.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![1, 2, 4, 8, 9, 10]);
        assert!(run
            .records
            .iter()
            .filter(|r| r.weights.is_some())
            .map(|r| r.t)
            .eq([9, 10]));
        assert_eq!(run.records[1].unique_count, 2);
    }

    #[test]
    fn config_validation() {
        let bad = RunConfig {
            rounds: 0,
            ..RunConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = RunConfig {
            checkpoint_ratio: 1.0,
            ..RunConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
