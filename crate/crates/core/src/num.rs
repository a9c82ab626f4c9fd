//! Scalar values as they appear in traces and reports: exact rationals or
//! 64-bit floats.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

/// A number that is either exact (`"p/q"` in JSON) or a float (a JSON number
/// with 17 significant digits).
#[derive(Clone, Debug, PartialEq)]
pub enum Num {
    Exact(BigRational),
    Float(f64),
}

impl Num {
    pub fn ratio(p: i64, q: i64) -> Num {
        Num::Exact(BigRational::new(p.into(), q.into()))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Num::Exact(r) => rational_to_f64(r),
            Num::Float(x) => *x,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Num::Exact(r) => r.is_zero(),
            Num::Float(x) => *x == 0.0,
        }
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            Num::Exact(r) => Some(r),
            Num::Float(_) => None,
        }
    }
}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Num::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Num::Float(x) => f.write_str(&format_f64(*x)),
        }
    }
}

/// Exact weights with longer denominators are written unreduced.
pub(crate) const REDUCED_OUTPUT_BITS: u64 = 4096;

/// `x` with 17 significant digits, scientific notation.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Natural log of a positive big integer, accurate for any bit length.
pub fn ln_bigint(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap_or(f64::NAN).ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap_or(f64::NAN);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    if let Some(v) = r.to_f64().filter(|v| v.is_finite() && *v != 0.0) {
        return v;
    }
    if r.is_zero() {
        return 0.0;
    }
    let sign = if r.numer() < &BigInt::zero() {
        -1.0
    } else {
        1.0
    };
    sign * (ln_bigint(&r.numer().magnitude().clone().into())
        - ln_bigint(&r.denom().magnitude().clone().into()))
    .exp()
}

pub(crate) fn raw_f64(x: f64) -> Box<RawValue> {
    let text = if x.is_finite() {
        format_f64(x)
    } else {
        // JSON has no non-finite numbers.
        format!("\"{x}\"")
    };
    RawValue::from_string(text).expect("formatted float is valid JSON")
}

/// Serializes an `f64` with 17 significant digits.
pub(crate) mod f64_17 {
    use serde::Serializer;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        serde::Serialize::serialize(&super::raw_f64(*x), s)
    }
}

pub(crate) mod vec_f64_17 {
    use serde::ser::SerializeSeq;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            seq.serialize_element(&super::raw_f64(*x))?;
        }
        seq.end()
    }
}

pub(crate) mod opt_vec_f64_17 {
    use serde::Serializer;

    pub fn serialize<S: Serializer>(xs: &Option<Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
        match xs {
            Some(v) => super::vec_f64_17::serialize(v, s),
            None => s.serialize_none(),
        }
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Num::Exact(_) => s.serialize_str(&self.to_string()),
            Num::Float(x) => raw_f64(*x).serialize(s),
        }
    }
}

pub(crate) fn parse_rational(text: &str) -> Option<BigRational> {
    let (p, q) = text.split_once('/')?;
    let p: BigInt = p.trim().parse().ok()?;
    let q: BigInt = q.trim().parse().ok()?;
    if q.is_zero() {
        return None;
    }
    if q.is_positive() && q.bits() > REDUCED_OUTPUT_BITS {
        return Some(BigRational::new_raw(p, q));
    }
    Some(BigRational::new(p, q))
}

struct NumVisitor;

impl Visitor<'_> for NumVisitor {
    type Value = Num;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a \"p/q\" string or a number")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Num, E> {
        parse_rational(v)
            .map(Num::Exact)
            .ok_or_else(|| E::custom(format!("not a rational: {v:?}")))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Num, E> {
        Ok(Num::Float(v))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Num, E> {
        Ok(Num::Float(v as f64))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Num, E> {
        Ok(Num::Float(v as f64))
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Num, D::Error> {
        d.deserialize_any(NumVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_serializes_as_fraction_string() {
        assert_eq!(serde_json::to_string(&Num::ratio(2, 6)).unwrap(), "\"1/3\"");
        assert_eq!(serde_json::to_string(&Num::ratio(4, 2)).unwrap(), "\"2/1\"");
    }

    #[test]
    fn float_serializes_with_17_digits() {
        let s = serde_json::to_string(&Num::Float(1.0 / 3.0)).unwrap();
        assert_eq!(s, "3.3333333333333331e-1");
        let back: Num = serde_json::from_str(&s).unwrap();
        assert_eq!(back, Num::Float(1.0 / 3.0));
    }

    #[test]
    fn parse_back_rational() {
        let back: Num = serde_json::from_str("\"3/16\"").unwrap();
        assert_eq!(back, Num::ratio(3, 16));
        assert!(serde_json::from_str::<Num>("\"3/0\"").is_err());
    }

    #[test]
    fn ln_of_huge_integers() {
        let x = BigInt::from(1u8) << 5000u32;
        let got = ln_bigint(&x);
        assert!((got - 5000.0 * std::f64::consts::LN_2).abs() < 1e-9);
        let y = BigInt::from(12345u32);
        assert!((ln_bigint(&y) - 12345f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn tiny_rational_to_f64() {
        let r = BigRational::new(BigInt::from(3), BigInt::from(1) << 1030u32);
        let v = rational_to_f64(&r);
        let expected = (3f64.ln() - 1030.0 * std::f64::consts::LN_2).exp();
        assert!(v > 0.0);
        assert!((v - expected).abs() <= expected * 1e-9);
    }
}
