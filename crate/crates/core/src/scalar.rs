//! Exact ordered-field scalars.
//!
//! Everything in this crate that touches job sizes, machine loads or dual
//! values is generic over [`Scalar`]. The trait is implemented for every
//! `num_rational::Ratio<T>` over a signed integer type, so the same code runs on
//! `BigRational` (the default used by the crate-root aliases) and on the
//! fixed-width `Rational64` for quick experiments. Floating point types do not
//! qualify: comparisons against `1 + R` distinguish `<` from `<=` and must be
//! exact.

use std::fmt::{Debug, Display};
use std::hash::Hash;
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{NumAssignRef, NumRef, Signed, ToPrimitive};

pub trait Scalar:
    Clone
    + Ord
    + Hash
    + Debug
    + Display
    + FromStr
    + Signed
    + NumRef
    + NumAssignRef
    + Send
    + Sync
    + 'static
{
    /// The exact value `num / den`. Panics if `den == 0`.
    fn from_frac(num: i64, den: i64) -> Self;

    fn from_int(n: i64) -> Self {
        Self::from_frac(n, 1)
    }

    fn from_usize(n: usize) -> Self {
        Self::from_frac(i64::try_from(n).expect("count fits in i64"), 1)
    }

    /// Canonical `num/den` rendering, always with an explicit denominator.
    fn to_frac_string(&self) -> String;

    /// Lossy conversion for display and timing tables only.
    fn to_f64(&self) -> f64;

    /// Smallest integer `>= self`.
    fn ceil_to_i64(&self) -> i64;
}

impl<T> Scalar for Ratio<T>
where
    T: Clone
        + Integer
        + Signed
        + Hash
        + Debug
        + Display
        + FromStr
        + From<i64>
        + Send
        + Sync
        + 'static,
    Ratio<T>: ToPrimitive + NumAssignRef + NumRef,
{
    fn from_frac(num: i64, den: i64) -> Self {
        Ratio::new(T::from(num), T::from(den))
    }

    fn to_frac_string(&self) -> String {
        format!("{}/{}", self.numer(), self.denom())
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn ceil_to_i64(&self) -> i64 {
        let c = self.ceil().to_integer();
        let s = c.to_string();
        s.parse().expect("ceiling fits in i64")
    }
}

/// Parses `num/den` or a bare integer into an exact scalar.
pub fn parse_scalar<S: Scalar>(text: &str) -> Option<S> {
    let text = text.trim();
    if text.is_empty() {
        return None;
    }
    if let Some((n, d)) = text.split_once('/') {
        let valid = |t: &str| {
            let t = t.strip_prefix('-').unwrap_or(t);
            !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit())
        };
        if !valid(n) || !valid(d) || d.trim_start_matches('-').bytes().all(|b| b == b'0') {
            return None;
        }
    } else {
        let t = text.strip_prefix('-').unwrap_or(text);
        if t.is_empty() || !t.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
    }
    text.parse::<S>().ok()
}
