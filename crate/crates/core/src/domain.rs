//! Domain types shared by every module: labeled examples, datasets, decision
//! stumps and their mistake sets on a fixed dataset.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A binary label or polarity, `+1` or `-1`.
///
/// `Pos` orders before `Neg`; the canonical stump order relies on this.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Pos,
    Neg,
}

impl Sign {
    pub fn from_i64(v: i64) -> Option<Sign> {
        match v {
            1 => Some(Sign::Pos),
            -1 => Some(Sign::Neg),
            _ => None,
        }
    }

    pub fn value(self) -> i8 {
        match self {
            Sign::Pos => 1,
            Sign::Neg => -1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.value())
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Pos => Sign::Neg,
            Sign::Neg => Sign::Pos,
        }
    }
}

impl std::ops::Mul for Sign {
    type Output = Sign;

    fn mul(self, rhs: Sign) -> Sign {
        if self == rhs {
            Sign::Pos
        } else {
            Sign::Neg
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sign::Pos => f.write_str("+1"),
            Sign::Neg => f.write_str("-1"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: Sign,
}

impl Example {
    pub fn new(features: Vec<f64>, label: Sign) -> Self {
        Example { features, label }
    }
}

/// A fixed, ordered set of `m >= 2` examples in `[0,1]^n`.
///
/// Example positions never change once built, so a position is a stable
/// identifier for the example throughout a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    examples: Vec<Example>,
    n: usize,
}

impl Dataset {
    pub fn new(examples: Vec<Example>) -> Result<Self> {
        if examples.len() < 2 {
            return Err(Error::invalid(format!(
                "a dataset needs at least 2 examples, got {}",
                examples.len()
            )));
        }
        let n = examples[0].features.len();
        if n == 0 {
            return Err(Error::invalid("examples must have at least one feature"));
        }
        for (l, ex) in examples.iter().enumerate() {
            if ex.features.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: ex.features.len(),
                });
            }
            if let Some(v) = ex.features.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::invalid(format!(
                    "example {} has feature value {v} outside [0,1]",
                    l + 1
                )));
            }
        }
        Ok(Dataset { examples, n })
    }

    /// Builds a dataset from parallel feature rows and `±1` labels.
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: &[i64]) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: rows.len(),
                got: labels.len(),
            });
        }
        let examples = rows
            .into_iter()
            .zip(labels)
            .map(|(features, &y)| {
                let label = Sign::from_i64(y)
                    .ok_or_else(|| Error::invalid(format!("label {y} is not -1 or +1")))?;
                Ok(Example::new(features, label))
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(examples)
    }

    pub fn m(&self) -> usize {
        self.examples.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn label(&self, l: usize) -> Sign {
        self.examples[l].label
    }

    pub fn labels(&self) -> impl Iterator<Item = Sign> + '_ {
        self.examples.iter().map(|e| e.label)
    }
}

/// A weak hypothesis: a constant, or `polarity * sign(x_feature - threshold)`.
///
/// `feature` is zero-based; it is printed and serialized one-based.
#[derive(Clone, Copy, Debug)]
pub enum Stump {
    Constant(Sign),
    Threshold {
        feature: usize,
        threshold: f64,
        polarity: Sign,
    },
}

impl Stump {
    pub fn threshold(feature: usize, threshold: f64, polarity: Sign) -> Self {
        Stump::Threshold {
            feature,
            threshold,
            polarity,
        }
    }

    /// The stump with every prediction flipped.
    pub fn negate(&self) -> Stump {
        match *self {
            Stump::Constant(s) => Stump::Constant(s.flip()),
            Stump::Threshold {
                feature,
                threshold,
                polarity,
            } => Stump::Threshold {
                feature,
                threshold,
                polarity: polarity.flip(),
            },
        }
    }

    /// Prediction at `x`. A query exactly on the threshold resolves upward,
    /// i.e. to `polarity`.
    pub fn predict(&self, x: &[f64]) -> Result<Sign> {
        if let Stump::Threshold { feature, .. } = *self {
            if feature >= x.len() {
                return Err(Error::DimensionMismatch {
                    expected: feature + 1,
                    got: x.len(),
                });
            }
        }
        Ok(self.predict_unchecked(x))
    }

    #[inline]
    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> Sign {
        match *self {
            Stump::Constant(s) => s,
            Stump::Threshold {
                feature,
                threshold,
                polarity,
            } => {
                if x[feature] < threshold {
                    polarity.flip()
                } else {
                    polarity
                }
            }
        }
    }

    fn key(&self) -> (u8, usize, f64, Sign) {
        match *self {
            Stump::Constant(s) => (0, 0, 0.0, s),
            Stump::Threshold {
                feature,
                threshold,
                polarity,
            } => (1, feature, threshold, polarity),
        }
    }
}

impl PartialEq for Stump {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Stump {}

impl PartialOrd for Stump {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Canonical order: constants first (`+1` before `-1`), then ascending
/// `(feature, threshold, polarity)` with `+` before `-`.
impl Ord for Stump {
    fn cmp(&self, other: &Self) -> Ordering {
        let (ka, fa, ta, pa) = self.key();
        let (kb, fb, tb, pb) = other.key();
        ka.cmp(&kb)
            .then(fa.cmp(&fb))
            .then(ta.total_cmp(&tb))
            .then(pa.cmp(&pb))
    }
}

impl Hash for Stump {
    fn hash<H: Hasher>(&self, state: &mut H) {
        let (k, f, t, p) = self.key();
        (k, f, t.to_bits(), p).hash(state);
    }
}

impl fmt::Display for Stump {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Stump::Constant(s) => write!(f, "const({s})"),
            Stump::Threshold {
                feature,
                threshold,
                polarity,
            } => {
                let p = if polarity == Sign::Pos { '+' } else { '-' };
                write!(f, "(x{}, {threshold}, {p})", feature + 1)
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct StumpRepr {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    constant: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    feature: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    polarity: Option<i64>,
}

impl Serialize for Stump {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let repr = match *self {
            Stump::Constant(s) => StumpRepr {
                constant: Some(s.value().into()),
                feature: None,
                threshold: None,
                polarity: None,
            },
            Stump::Threshold {
                feature,
                threshold,
                polarity,
            } => StumpRepr {
                constant: None,
                feature: Some(feature + 1),
                threshold: Some(threshold),
                polarity: Some(polarity.value().into()),
            },
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Stump {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = StumpRepr::deserialize(deserializer)?;
        let sign =
            |v: i64| Sign::from_i64(v).ok_or_else(|| D::Error::custom(format!("bad sign {v}")));
        match repr {
            StumpRepr {
                constant: Some(c),
                feature: None,
                threshold: None,
                polarity: None,
            } => Ok(Stump::Constant(sign(c)?)),
            StumpRepr {
                constant: None,
                feature: Some(i),
                threshold: Some(t),
                polarity: Some(p),
            } if i >= 1 => Ok(Stump::threshold(i - 1, t, sign(p)?)),
            _ => Err(D::Error::custom("malformed stump")),
        }
    }
}

/// Fixed-length bit set over example positions; bit `l` is set iff the
/// hypothesis errs on example `l`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MistakeVector {
    words: Vec<u64>,
    len: usize,
}

impl MistakeVector {
    pub fn empty(len: usize) -> Self {
        MistakeVector {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut v = Self::empty(len);
        for l in indices {
            v.set(l);
        }
        v
    }

    pub fn set(&mut self, l: usize) {
        assert!(l < self.len, "bit {l} out of range for length {}", self.len);
        self.words[l / 64] |= 1 << (l % 64);
    }

    pub fn contains(&self, l: usize) -> bool {
        l < self.len && self.words[l / 64] >> (l % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_full(&self) -> bool {
        self.count() == self.len
    }

    pub fn is_subset_of(&self, other: &MistakeVector) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    /// Positions (zero-based) of the set bits, ascending.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(wi * 64 + b)
            })
        })
    }

    /// Positions where exactly one of the two vectors is set.
    pub fn symmetric_difference(&self, other: &MistakeVector) -> MistakeVector {
        MistakeVector {
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(a, b)| a ^ b)
                .collect(),
            len: self.len,
        }
    }

    pub fn complement(&self) -> MistakeVector {
        let mut words: Vec<u64> = self.words.iter().map(|w| !w).collect();
        let tail = self.len % 64;
        if tail != 0 {
            if let Some(last) = words.last_mut() {
                *last &= (1u64 << tail) - 1;
            }
        }
        MistakeVector {
            words,
            len: self.len,
        }
    }
}

/// Mistake set of `h` on `data`.
pub fn mistake_vector(h: &Stump, data: &Dataset) -> MistakeVector {
    let mut v = MistakeVector::empty(data.m());
    for (l, ex) in data.examples().iter().enumerate() {
        if h.predict_unchecked(&ex.features) != ex.label {
            v.set(l);
        }
    }
    v
}
