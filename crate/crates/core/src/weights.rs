//! Example weights on the simplex, in exact or floating arithmetic.
//!
//! A [`WeightState`] stores one non-negative *mass* per example together with
//! their common total; the weight of example `l` is `mass[l] / total`. In the
//! exact backend masses are integers over a shared denominator, which keeps
//! prefix sums and error comparisons in integer arithmetic. In the float
//! backend the total is 1 and masses are the weights themselves.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::domain::MistakeVector;
use crate::error::{Error, Result};
use crate::num::{ln_bigint, rational_to_f64, Num, REDUCED_OUTPUT_BITS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Rational,
    Float,
}

/// Why a weight update could not be applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateFailure {
    /// A float weight reached zero or left the finite range.
    Underflow,
}

/// Arithmetic used by a boosting run.
pub trait Arithmetic: Copy + Debug + Default + Send + Sync + 'static {
    type Mass: Clone + Debug + PartialEq + PartialOrd + Send + Sync;

    const BACKEND: Backend;

    fn zero() -> Self::Mass;

    fn add_assign(acc: &mut Self::Mass, x: &Self::Mass);

    fn sub(a: &Self::Mass, b: &Self::Mass) -> Self::Mass;

    fn is_zero(x: &Self::Mass) -> bool;

    /// Whether two masses (over the same total) count as tied.
    fn ties(a: &Self::Mass, b: &Self::Mass, tolerance: f64) -> bool;

    /// `num / den` as a trace value.
    fn ratio(num: &Self::Mass, den: &Self::Mass) -> Num;

    /// Like [`Arithmetic::ratio`], but may skip reducing very large fractions.
    fn fraction(num: &Self::Mass, den: &Self::Mass) -> Num {
        Self::ratio(num, den)
    }

    fn ratio_f64(num: &Self::Mass, den: &Self::Mass) -> f64;

    /// `ln(a / b)` for positive `a`, `b`.
    fn ln_ratio(a: &Self::Mass, b: &Self::Mass) -> f64;

    /// Multiplies weights on `mistakes` by `1/(2e)` and the rest by
    /// `1/(2(1-e))`, where `e = error / total`.
    fn reweight(
        state: &mut WeightState<Self>,
        mistakes: &MistakeVector,
        error: &Self::Mass,
    ) -> std::result::Result<(), UpdateFailure>;

    /// Bit length of the representation's denominator; 0 for floats.
    fn precision_bits(state: &WeightState<Self>) -> u64;

    fn uniform_state(m: usize) -> Result<WeightState<Self>>;

    /// State from a strictly positive float point on the simplex.
    fn simplex_state(point: &[f64]) -> Result<WeightState<Self>>;
}

/// Arbitrary-precision rational weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Exact;

/// 64-bit float weights, renormalized after every update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Float;

impl Arithmetic for Exact {
    type Mass = BigInt;

    const BACKEND: Backend = Backend::Rational;

    fn zero() -> BigInt {
        BigInt::zero()
    }

    fn add_assign(acc: &mut BigInt, x: &BigInt) {
        *acc += x;
    }

    fn sub(a: &BigInt, b: &BigInt) -> BigInt {
        a - b
    }

    fn is_zero(x: &BigInt) -> bool {
        x.is_zero()
    }

    fn ties(a: &BigInt, b: &BigInt, _tolerance: f64) -> bool {
        a == b
    }

    fn ratio(num: &BigInt, den: &BigInt) -> Num {
        Num::Exact(BigRational::new(num.clone(), den.clone()))
    }

    fn fraction(num: &BigInt, den: &BigInt) -> Num {
        if den.bits() <= REDUCED_OUTPUT_BITS {
            Self::ratio(num, den)
        } else {
            Num::Exact(BigRational::new_raw(num.clone(), den.clone()))
        }
    }

    fn ratio_f64(num: &BigInt, den: &BigInt) -> f64 {
        rational_to_f64(&BigRational::new_raw(num.clone(), den.clone()))
    }

    fn ln_ratio(a: &BigInt, b: &BigInt) -> f64 {
        ln_bigint(a) - ln_bigint(b)
    }

    fn reweight(
        state: &mut WeightState<Self>,
        mistakes: &MistakeVector,
        error: &BigInt,
    ) -> std::result::Result<(), UpdateFailure> {
        // w/(2e) = N/(2E) and w/(2(1-e)) = N/(2(D-E)); over the common
        // denominator 2E(D-E) the masses become N(D-E) and NE.
        let correct = &state.total - error;
        for (l, mass) in state.masses.iter_mut().enumerate() {
            if mistakes.contains(l) {
                *mass *= &correct;
            } else {
                *mass *= error;
            }
        }
        state.total = (error * &correct) << 1u32;
        state.reduce();
        Ok(())
    }

    fn precision_bits(state: &WeightState<Self>) -> u64 {
        state.denominator_bits()
    }

    fn uniform_state(m: usize) -> Result<WeightState<Self>> {
        WeightState::<Exact>::uniform(m)
    }

    fn simplex_state(point: &[f64]) -> Result<WeightState<Self>> {
        WeightState::<Exact>::from_f64_grid(point)
    }
}

impl Arithmetic for Float {
    type Mass = f64;

    const BACKEND: Backend = Backend::Float;

    fn zero() -> f64 {
        0.0
    }

    fn add_assign(acc: &mut f64, x: &f64) {
        *acc += x;
    }

    fn sub(a: &f64, b: &f64) -> f64 {
        a - b
    }

    fn is_zero(x: &f64) -> bool {
        *x == 0.0
    }

    fn ties(a: &f64, b: &f64, tolerance: f64) -> bool {
        (a - b).abs() <= tolerance * a.max(*b).max(1e-300)
    }

    fn ratio(num: &f64, den: &f64) -> Num {
        Num::Float(num / den)
    }

    fn ratio_f64(num: &f64, den: &f64) -> f64 {
        num / den
    }

    fn ln_ratio(a: &f64, b: &f64) -> f64 {
        (a / b).ln()
    }

    fn reweight(
        state: &mut WeightState<Self>,
        mistakes: &MistakeVector,
        error: &f64,
    ) -> std::result::Result<(), UpdateFailure> {
        let eps = error / state.total;
        let up = 1.0 / (2.0 * eps);
        let down = 1.0 / (2.0 * (1.0 - eps));
        let mut next: Vec<f64> = state
            .masses
            .iter()
            .enumerate()
            .map(|(l, w)| {
                if mistakes.contains(l) {
                    w * up
                } else {
                    w * down
                }
            })
            .collect();
        let sum: f64 = next.iter().sum();
        for w in &mut next {
            *w /= sum;
        }
        // Subnormal weights are kept; only a weight lost to zero halts.
        if next.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(UpdateFailure::Underflow);
        }
        state.masses = next;
        state.total = 1.0;
        Ok(())
    }

    fn precision_bits(_state: &WeightState<Self>) -> u64 {
        0
    }

    fn uniform_state(m: usize) -> Result<WeightState<Self>> {
        WeightState::<Float>::uniform(m)
    }

    fn simplex_state(point: &[f64]) -> Result<WeightState<Self>> {
        WeightState::<Float>::from_f64(point)
    }
}

/// A strictly positive point on the `m`-simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightState<A: Arithmetic> {
    masses: Vec<A::Mass>,
    total: A::Mass,
}

impl<A: Arithmetic> WeightState<A> {
    pub fn m(&self) -> usize {
        self.masses.len()
    }

    pub fn backend(&self) -> Backend {
        A::BACKEND
    }

    pub fn masses(&self) -> &[A::Mass] {
        &self.masses
    }

    pub fn total(&self) -> &A::Mass {
        &self.total
    }

    /// Weight of example `l` (zero-based).
    pub fn weight(&self, l: usize) -> Num {
        A::ratio(&self.masses[l], &self.total)
    }

    /// All weights. Exact weights over a denominator longer than 4096 bits
    /// are left over the common denominator instead of reduced one by one.
    pub fn weights(&self) -> Vec<Num> {
        self.masses
            .iter()
            .map(|n| A::fraction(n, &self.total))
            .collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.masses
            .iter()
            .map(|n| A::ratio_f64(n, &self.total))
            .collect()
    }

    /// Unnormalized mass of the examples in `set`.
    pub fn mass_of(&self, set: &MistakeVector) -> A::Mass {
        let mut acc = A::zero();
        for l in set.ones() {
            A::add_assign(&mut acc, &self.masses[l]);
        }
        acc
    }
}

impl WeightState<Exact> {
    /// `w(l) = 1/m` exactly.
    pub fn uniform(m: usize) -> Result<Self> {
        check_m(m)?;
        Ok(WeightState {
            masses: vec![BigInt::one(); m],
            total: BigInt::from(m),
        })
    }

    pub fn from_rationals(weights: &[BigRational]) -> Result<Self> {
        check_m(weights.len())?;
        if weights.iter().any(|w| !w.is_positive()) {
            return Err(Error::invalid("weights must be strictly positive"));
        }
        let sum: BigRational = weights.iter().sum();
        if !sum.is_one() {
            return Err(Error::invalid(format!("weights sum to {sum}, not 1")));
        }
        let denom = weights
            .iter()
            .fold(BigInt::one(), |acc, w| acc.lcm(w.denom()));
        let masses = weights
            .iter()
            .map(|w| w.numer() * (&denom / w.denom()))
            .collect();
        let mut state = WeightState {
            masses,
            total: denom,
        };
        state.reduce();
        Ok(state)
    }

    /// Rounds a float simplex point onto the grid with denominator `2^53`
    /// (each entry at least one grid step) and renormalizes exactly.
    pub fn from_f64_grid(weights: &[f64]) -> Result<Self> {
        check_m(weights.len())?;
        let scale = (1u64 << 53) as f64;
        let masses: Vec<BigInt> = weights
            .iter()
            .map(|&w| BigInt::from(((w * scale).round() as u64).max(1)))
            .collect();
        let total = masses.iter().sum();
        let mut state = WeightState { masses, total };
        state.reduce();
        Ok(state)
    }

    /// Bit length of the common denominator; it bounds the bit length of
    /// every weight's reduced numerator and denominator.
    pub fn denominator_bits(&self) -> u64 {
        self.total.bits()
    }

    pub fn to_rationals(&self) -> Vec<BigRational> {
        self.masses
            .iter()
            .map(|n| BigRational::new(n.clone(), self.total.clone()))
            .collect()
    }

    fn reduce(&mut self) {
        let mut g = self.total.clone();
        for n in &self.masses {
            if g.is_one() {
                return;
            }
            // Binary gcd costs the size of the larger operand; shrink it first.
            g = g.gcd(&(n % &g));
        }
        if !g.is_one() {
            for n in &mut self.masses {
                *n /= &g;
            }
            self.total /= &g;
        }
    }
}

impl WeightState<Float> {
    pub fn uniform(m: usize) -> Result<Self> {
        check_m(m)?;
        Ok(WeightState {
            masses: vec![1.0 / m as f64; m],
            total: 1.0,
        })
    }

    /// Normalizes strictly positive finite values onto the simplex.
    pub fn from_f64(weights: &[f64]) -> Result<Self> {
        check_m(weights.len())?;
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::invalid(
                "weights must be strictly positive and finite",
            ));
        }
        let sum: f64 = weights.iter().sum();
        Ok(WeightState {
            masses: weights.iter().map(|w| w / sum).collect(),
            total: 1.0,
        })
    }
}

fn check_m(m: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::invalid(format!("need m >= 2 weights, got {m}")));
    }
    Ok(())
}

/// `Σ_{l in mistakes} w(l)`.
pub fn weighted_error<A: Arithmetic>(mistakes: &MistakeVector, w: &WeightState<A>) -> Result<Num> {
    if mistakes.len() != w.m() {
        return Err(Error::LengthMismatch {
            expected: w.m(),
            got: mistakes.len(),
        });
    }
    Ok(A::ratio(&w.mass_of(mistakes), w.total()))
}

/// Sum of all weights as f64; used for sanity checks.
pub fn weight_sum_f64<A: Arithmetic>(w: &WeightState<A>) -> f64 {
    w.weights().iter().map(Num::to_f64).sum()
}

/// Sum of all weights, exactly.
pub fn weight_sum_exact(w: &WeightState<Exact>) -> BigRational {
    let sum: BigInt = w.masses().iter().sum();
    BigRational::new(sum, w.total().clone())
}
