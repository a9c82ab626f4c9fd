//! The midpoint-rule stump class, its AdaBoost-natural closure, dominance
//! pruning, and the optimal-stump query used by every boosting round.

use std::collections::HashMap;

use crate::domain::{mistake_vector, Dataset, MistakeVector, Sign, Stump};
use crate::error::{Error, Result};
use crate::num::Num;
use crate::weights::{Arithmetic, WeightState};

/// Default relative tolerance under which two float errors count as tied.
pub const DEFAULT_TIE_TOLERANCE: f64 = 1e-12;

/// `2(n(m-1)+1)`, the largest possible size of the generated class.
pub fn class_size_bound(n: usize, m: usize) -> usize {
    2 * (n * (m - 1) + 1)
}

/// Sorted projection of the dataset onto one feature.
#[derive(Clone, Debug)]
struct Projection {
    /// Example positions ordered by `(value, position)`.
    order: Vec<usize>,
    values: Vec<f64>,
    thresholds: Vec<f64>,
}

impl Projection {
    fn build(data: &Dataset, feature: usize) -> Self {
        let mut order: Vec<usize> = (0..data.m()).collect();
        let value = |l: usize| data.examples()[l].features[feature];
        order.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
        let values: Vec<f64> = order.iter().map(|&l| value(l)).collect();

        // Blocks of equal values, each with the set of labels it carries.
        let mut blocks: Vec<(f64, bool, bool)> = Vec::new();
        for (&l, &v) in order.iter().zip(&values) {
            let pos = data.label(l) == Sign::Pos;
            match blocks.last_mut() {
                Some((bv, has_pos, has_neg)) if *bv == v => {
                    *has_pos |= pos;
                    *has_neg |= !pos;
                }
                _ => blocks.push((v, pos, !pos)),
            }
        }
        let thresholds = blocks
            .windows(2)
            .filter(|pair| {
                let (_, lp, ln) = pair[0];
                let (_, hp, hn) = pair[1];
                // Skip only when both blocks carry the same single label.
                !((lp != ln) && (hp != hn) && lp == hp)
            })
            .map(|pair| midpoint(pair[0].0, pair[1].0))
            .collect();
        Projection {
            order,
            values,
            thresholds,
        }
    }

    /// Number of examples strictly below `threshold`.
    fn below(&self, threshold: f64) -> usize {
        self.values.partition_point(|&v| v < threshold)
    }
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = (lo + hi) / 2.0;
    // Only adjacent floats collapse onto `lo`; `hi` then sits on the upper
    // side because threshold ties resolve upward.
    if mid <= lo {
        hi
    } else {
        mid
    }
}

/// Midpoint-rule stumps (polarity `+1`) for every feature, ordered by
/// feature then threshold.
pub fn enumerate_midpoint_stumps(data: &Dataset) -> Vec<Stump> {
    (0..data.n())
        .flat_map(|i| {
            Projection::build(data, i)
                .thresholds
                .into_iter()
                .map(move |t| Stump::threshold(i, t, Sign::Pos))
        })
        .collect()
}

/// The generated class `Ĥ` in canonical order with mistake vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedClass {
    stumps: Vec<Stump>,
    mistakes: Vec<MistakeVector>,
}

impl GeneratedClass {
    /// Adds both constants and every negation, sorts canonically and drops
    /// duplicates. Does not check that each stump errs somewhere.
    pub fn close(raw: &[Stump], data: &Dataset) -> Self {
        let mut stumps: Vec<Stump> = raw
            .iter()
            .flat_map(|h| [*h, h.negate()])
            .chain([Stump::Constant(Sign::Pos), Stump::Constant(Sign::Neg)])
            .collect();
        stumps.sort();
        stumps.dedup();
        let mistakes = stumps.iter().map(|h| mistake_vector(h, data)).collect();
        GeneratedClass { stumps, mistakes }
    }

    pub fn stumps(&self) -> &[Stump] {
        &self.stumps
    }

    pub fn mistakes(&self) -> &[MistakeVector] {
        &self.mistakes
    }

    pub fn len(&self) -> usize {
        self.stumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stumps.is_empty()
    }

    /// The canonically first stump with no mistakes, if any.
    pub fn perfect_stump(&self) -> Option<Stump> {
        self.stumps
            .iter()
            .zip(&self.mistakes)
            .find(|(_, mv)| mv.is_empty())
            .map(|(h, _)| *h)
    }
}

/// Closes `raw` to an AdaBoost-natural class on `data`, or reports the
/// perfect stump that violates the every-stump-errs condition.
pub fn make_natural_closure(raw: &[Stump], data: &Dataset) -> Result<GeneratedClass> {
    let class = GeneratedClass::close(raw, data);
    match class.perfect_stump() {
        Some(h) => Err(Error::PerfectStump(h)),
        None => Ok(class),
    }
}

/// Positions in `class` of the effective set `Ê`, ascending.
///
/// Equal mistake vectors collapse onto their canonically first stump; then a
/// stump is dropped when a surviving stump's mistakes are a strict subset of
/// its own.
pub fn eliminate_dominated(class: &GeneratedClass) -> Vec<usize> {
    let mut first_with: HashMap<&MistakeVector, usize> = HashMap::new();
    let mut distinct = Vec::new();
    for (k, mv) in class.mistakes.iter().enumerate() {
        first_with.entry(mv).or_insert_with(|| {
            distinct.push(k);
            k
        });
    }

    // Strict subsets have strictly fewer mistakes, and dominance is
    // transitive, so checking against survivors in ascending count suffices.
    let mut by_count = distinct;
    by_count.sort_by_key(|&k| (class.mistakes[k].count(), k));
    let mut survivors: Vec<usize> = Vec::new();
    for k in by_count {
        let mv = &class.mistakes[k];
        let dominated = survivors
            .iter()
            .any(|&s| class.mistakes[s].is_subset_of(mv));
        if !dominated {
            survivors.push(k);
        }
    }
    survivors.sort_unstable();
    survivors
}

#[derive(Clone, Copy, Debug)]
enum FastEval {
    ConstPos,
    ConstNeg,
    Threshold { below: usize, polarity: Sign },
}

/// The generated class, the effective set and the per-feature sorted
/// projections used to evaluate all effective errors in one pass.
#[derive(Clone, Debug)]
pub struct HypothesisInventory {
    m: usize,
    n: usize,
    labels: Vec<Sign>,
    class: GeneratedClass,
    effective: Vec<usize>,
    projections: Vec<Projection>,
    fast: Vec<FastEval>,
    /// For each feature, effective positions of its threshold stumps in
    /// ascending threshold order.
    by_feature: Vec<Vec<usize>>,
}

impl HypothesisInventory {
    pub fn build(data: &Dataset) -> Result<Self> {
        let raw = enumerate_midpoint_stumps(data);
        let class = make_natural_closure(&raw, data)?;
        Ok(Self::from_class(data, class))
    }

    /// Builds the inventory from an already closed class.
    pub fn from_class(data: &Dataset, class: GeneratedClass) -> Self {
        let projections: Vec<Projection> =
            (0..data.n()).map(|i| Projection::build(data, i)).collect();
        let effective = eliminate_dominated(&class);
        let mut by_feature = vec![Vec::new(); data.n()];
        let fast = effective
            .iter()
            .enumerate()
            .map(|(pos, &k)| match class.stumps[k] {
                Stump::Constant(Sign::Pos) => FastEval::ConstPos,
                Stump::Constant(Sign::Neg) => FastEval::ConstNeg,
                Stump::Threshold {
                    feature,
                    threshold,
                    polarity,
                } => {
                    by_feature[feature].push(pos);
                    FastEval::Threshold {
                        below: projections[feature].below(threshold),
                        polarity,
                    }
                }
            })
            .collect();
        HypothesisInventory {
            m: data.m(),
            n: data.n(),
            labels: data.labels().collect(),
            class,
            effective,
            projections,
            fast,
            by_feature,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn generated(&self) -> &GeneratedClass {
        &self.class
    }

    /// `|Ĥ|`.
    pub fn generated_len(&self) -> usize {
        self.class.len()
    }

    /// `|Ê|`.
    pub fn effective_len(&self) -> usize {
        self.effective.len()
    }

    /// Canonical rank (position in `Ĥ`) of the `pos`-th effective stump.
    pub fn effective_rank(&self, pos: usize) -> usize {
        self.effective[pos]
    }

    pub fn effective_stump(&self, pos: usize) -> Stump {
        self.class.stumps[self.effective[pos]]
    }

    pub fn effective_stumps(&self) -> impl Iterator<Item = Stump> + '_ {
        self.effective.iter().map(|&k| self.class.stumps[k])
    }

    pub fn effective_mistakes(&self, pos: usize) -> &MistakeVector {
        &self.class.mistakes[self.effective[pos]]
    }

    /// Stump with canonical rank `rank`.
    pub fn stump(&self, rank: usize) -> Option<Stump> {
        self.class.stumps.get(rank).copied()
    }

    pub fn mistakes(&self, rank: usize) -> Option<&MistakeVector> {
        self.class.mistakes.get(rank)
    }

    /// Canonical rank of `h` in `Ĥ`.
    pub fn rank_of(&self, h: &Stump) -> Option<usize> {
        self.class.stumps.binary_search(h).ok()
    }

    /// Number of midpoint thresholds found on each feature.
    pub fn thresholds_per_feature(&self) -> Vec<usize> {
        self.projections
            .iter()
            .map(|p| p.thresholds.len())
            .collect()
    }

    pub fn labels(&self) -> &[Sign] {
        &self.labels
    }
}

/// Error masses (numerators over `w.total()`) of every effective stump, via
/// per-feature prefix sums over the sorted projections.
pub fn fast_error_masses<A: Arithmetic>(
    inv: &HypothesisInventory,
    w: &WeightState<A>,
) -> Vec<A::Mass> {
    let masses = w.masses();
    let mut pos_total = A::zero();
    let mut neg_total = A::zero();
    for (mass, label) in masses.iter().zip(&inv.labels) {
        match label {
            Sign::Pos => A::add_assign(&mut pos_total, mass),
            Sign::Neg => A::add_assign(&mut neg_total, mass),
        }
    }

    let mut out: Vec<A::Mass> = vec![A::zero(); inv.effective.len()];
    for (pos, eval) in inv.fast.iter().enumerate() {
        match eval {
            FastEval::ConstPos => out[pos] = neg_total.clone(),
            FastEval::ConstNeg => out[pos] = pos_total.clone(),
            FastEval::Threshold { .. } => {}
        }
    }

    for (feature, stumps) in inv.by_feature.iter().enumerate() {
        if stumps.is_empty() {
            continue;
        }
        let order = &inv.projections[feature].order;
        let mut pos_below = A::zero();
        let mut neg_below = A::zero();
        let mut cursor = 0;
        for &pos in stumps {
            let FastEval::Threshold { below, polarity } = inv.fast[pos] else {
                unreachable!("by_feature lists threshold stumps only");
            };
            while cursor < below {
                let l = order[cursor];
                match inv.labels[l] {
                    Sign::Pos => A::add_assign(&mut pos_below, &masses[l]),
                    Sign::Neg => A::add_assign(&mut neg_below, &masses[l]),
                }
                cursor += 1;
            }
            // Polarity + errs on positives below and negatives above.
            let mut err = match polarity {
                Sign::Pos => A::sub(&neg_total, &neg_below),
                Sign::Neg => A::sub(&pos_total, &pos_below),
            };
            match polarity {
                Sign::Pos => A::add_assign(&mut err, &pos_below),
                Sign::Neg => A::add_assign(&mut err, &neg_below),
            }
            out[pos] = err;
        }
    }
    out
}

/// Weighted error of every effective stump, in effective order.
pub fn fast_errors<A: Arithmetic>(inv: &HypothesisInventory, w: &WeightState<A>) -> Vec<Num> {
    fast_error_masses(inv, w)
        .iter()
        .map(|e| A::ratio(e, w.total()))
        .collect()
}

/// Same values as [`fast_errors`], by summing over each mistake vector.
pub fn naive_errors<A: Arithmetic>(inv: &HypothesisInventory, w: &WeightState<A>) -> Vec<Num> {
    (0..inv.effective_len())
        .map(|pos| A::ratio(&w.mass_of(inv.effective_mistakes(pos)), w.total()))
        .collect()
}

/// Result of an optimal-stump query.
#[derive(Clone, Debug)]
pub struct Selection<A: Arithmetic> {
    /// Effective position of the representative.
    pub chosen: usize,
    pub stump: Stump,
    /// Error mass of the representative (over `w.total()`).
    pub error: A::Mass,
    pub epsilon: Num,
    /// Effective positions of every stump tied at the minimum, ascending.
    pub tie_set: Vec<usize>,
}

/// Picks the canonically first stump among the minimum-error stumps of `Ê`.
pub fn select_optimal<A: Arithmetic>(
    inv: &HypothesisInventory,
    w: &WeightState<A>,
    tie_tolerance: f64,
) -> Result<Selection<A>> {
    if w.m() != inv.m {
        return Err(Error::LengthMismatch {
            expected: inv.m,
            got: w.m(),
        });
    }
    let errors = fast_error_masses(inv, w);
    let (chosen, tie_set) = argmin_with_ties::<A>(&errors, tie_tolerance)
        .ok_or_else(|| Error::Invariant("effective set is empty".into()))?;
    let error = errors[chosen].clone();
    Ok(Selection {
        chosen,
        stump: inv.effective_stump(chosen),
        epsilon: A::ratio(&error, w.total()),
        error,
        tie_set,
    })
}

/// Index of the first minimal entry and all entries tied with the minimum.
pub(crate) fn argmin_with_ties<A: Arithmetic>(
    errors: &[A::Mass],
    tolerance: f64,
) -> Option<(usize, Vec<usize>)> {
    let min = errors.iter().fold(None::<&A::Mass>, |best, e| match best {
        Some(b) if b <= e => Some(b),
        _ => Some(e),
    })?;
    let ties: Vec<usize> = errors
        .iter()
        .enumerate()
        .filter(|(_, e)| A::ties(e, min, tolerance))
        .map(|(k, _)| k)
        .collect();
    Some((ties[0], ties))
}
