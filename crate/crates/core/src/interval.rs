//! Closed bounded intervals `[lo, hi]` with the arithmetic, orderings and
//! generalized Hukuhara difference used throughout the crate.
//!
//! Two partial orders are provided:
//!
//! - LU: compare lower and upper endpoints componentwise.
//! - CW: compare centers `(lo + hi) / 2` and half-widths `(hi - lo) / 2`.
//!
//! Equality is exact floating-point equality. Tolerances belong in callers.
//! CW comparisons are exact too: the endpoint sums and differences are
//! compared without rounding, so `[5.6e-17, 1]` is not CW-below `[0, 1]`.

use std::fmt;
use std::ops::{Add, Neg};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntervalError {
    #[error("interval bounds must be finite, got [{lo}, {hi}]")]
    NonFinite { lo: f64, hi: f64 },
    #[error("interval lower bound {lo} exceeds upper bound {hi}")]
    Inverted { lo: f64, hi: f64 },
    #[error("interval tuples have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("interval tuple must not be empty")]
    EmptyTuple,
    #[error("malformed interval literal `{0}`")]
    Syntax(String),
}

/// A closed bounded real interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, IntervalError> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(IntervalError::NonFinite { lo, hi });
        }
        if lo > hi {
            return Err(IntervalError::Inverted { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    /// Embeds a real number as the degenerate interval `[a, a]`.
    ///
    /// Panics if `a` is not finite.
    pub fn point(a: f64) -> Self {
        assert!(a.is_finite(), "degenerate interval from non-finite value {a}");
        Self { lo: a, hi: a }
    }

    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };

    /// Builds `[center - half_width, center + half_width]`.
    pub fn from_center_width(center: f64, half_width: f64) -> Result<Self, IntervalError> {
        Self::new(center - half_width, center + half_width)
    }

    /// The interval spanned by two reals in either order.
    pub fn hull(a: f64, b: f64) -> Result<Self, IntervalError> {
        Self::new(a.min(b), a.max(b))
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    #[inline]
    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    /// `k * [lo, hi]`; a negative factor swaps the endpoints.
    pub fn scale(&self, k: f64) -> Self {
        if k >= 0.0 {
            Self { lo: k * self.lo, hi: k * self.hi }
        } else {
            Self { lo: k * self.hi, hi: k * self.lo }
        }
    }

    /// Generalized Hukuhara difference `self ⊖g other`.
    pub fn gh_diff(&self, other: &Interval) -> Self {
        let dl = self.lo - other.lo;
        let du = self.hi - other.hi;
        Self { lo: dl.min(du), hi: dl.max(du) }
    }

    /// Hausdorff distance `max(|Δlo|, |Δhi|)`.
    pub fn hausdorff(&self, other: &Interval) -> f64 {
        (self.lo - other.lo).abs().max((self.hi - other.hi).abs())
    }

    pub fn leq_lu(&self, other: &Interval) -> bool {
        self.lo <= other.lo && self.hi <= other.hi
    }

    pub fn lt_lu(&self, other: &Interval) -> bool {
        self.leq_lu(other) && self != other
    }

    pub fn leq_cw(&self, other: &Interval) -> bool {
        sum_sign([self.lo, self.hi, -other.lo, -other.hi]) <= 0
            && sum_sign([self.hi, -self.lo, -other.hi, other.lo]) <= 0
    }

    pub fn lt_cw(&self, other: &Interval) -> bool {
        self.leq_cw(other) && self != other
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Exact sign of a sum of finite doubles (Shewchuk expansion growth).
fn sum_sign<const N: usize>(terms: [f64; N]) -> i8 {
    let mut e: Vec<f64> = Vec::with_capacity(N);
    for t in terms {
        let mut q = t;
        for c in e.iter_mut() {
            let (s, err) = two_sum(q, *c);
            *c = err;
            q = s;
        }
        e.push(q);
    }
    // Components are non-overlapping and increasing in magnitude.
    match e.iter().rev().find(|c| **c != 0.0) {
        Some(c) if *c > 0.0 => 1,
        Some(_) => -1,
        None => 0,
    }
}

impl Add for Interval {
    type Output = Interval;

    fn add(self, rhs: Interval) -> Interval {
        Interval { lo: self.lo + rhs.lo, hi: self.hi + rhs.hi }
    }
}

impl Neg for Interval {
    type Output = Interval;

    fn neg(self) -> Interval {
        self.scale(-1.0)
    }
}

impl std::iter::Sum for Interval {
    fn sum<I: Iterator<Item = Interval>>(iter: I) -> Interval {
        iter.fold(Interval::ZERO, |acc, x| acc + x)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f.precision() {
            Some(p) => write!(f, "[{:.*}, {:.*}]", p, self.lo, p, self.hi),
            None => write!(f, "[{}, {}]", self.lo, self.hi),
        }
    }
}

impl FromStr for Interval {
    type Err = IntervalError;

    /// Parses `[lo, hi]`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let syntax = || IntervalError::Syntax(s.to_string());
        let inner = s
            .trim()
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(syntax)?;
        let (lo, hi) = inner.split_once(',').ok_or_else(syntax)?;
        let lo: f64 = lo.trim().parse().map_err(|_| syntax())?;
        let hi: f64 = hi.trim().parse().map_err(|_| syntax())?;
        Interval::new(lo, hi)
    }
}

/// An ordered, non-empty sequence of intervals (one per objective).
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalTuple(Vec<Interval>);

impl IntervalTuple {
    pub fn new(items: Vec<Interval>) -> Result<Self, IntervalError> {
        if items.is_empty() {
            return Err(IntervalError::EmptyTuple);
        }
        Ok(Self(items))
    }

    pub fn items(&self) -> &[Interval] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn zip_check<'a>(
        &'a self,
        other: &'a IntervalTuple,
    ) -> Result<impl Iterator<Item = (&'a Interval, &'a Interval)>, IntervalError> {
        if self.len() != other.len() {
            return Err(IntervalError::LengthMismatch { left: self.len(), right: other.len() });
        }
        Ok(self.0.iter().zip(other.0.iter()))
    }

    pub fn leq_lu(&self, other: &IntervalTuple) -> Result<bool, IntervalError> {
        Ok(self.zip_check(other)?.all(|(a, b)| a.leq_lu(b)))
    }

    /// Componentwise `≤_LU` with `<_LU` in at least one component.
    pub fn lt_lu(&self, other: &IntervalTuple) -> Result<bool, IntervalError> {
        let mut strict = false;
        for (a, b) in self.zip_check(other)? {
            if !a.leq_lu(b) {
                return Ok(false);
            }
            strict |= a.lt_lu(b);
        }
        Ok(strict)
    }

    pub fn leq_cw(&self, other: &IntervalTuple) -> Result<bool, IntervalError> {
        Ok(self.zip_check(other)?.all(|(a, b)| a.leq_cw(b)))
    }

    pub fn lt_cw(&self, other: &IntervalTuple) -> Result<bool, IntervalError> {
        let mut strict = false;
        for (a, b) in self.zip_check(other)? {
            if !a.leq_cw(b) {
                return Ok(false);
            }
            strict |= a.lt_cw(b);
        }
        Ok(strict)
    }

    /// Every component strictly LU-smaller.
    pub fn all_lt_lu(&self, other: &IntervalTuple) -> Result<bool, IntervalError> {
        Ok(self.zip_check(other)?.all(|(a, b)| a.lt_lu(b)))
    }

    pub fn all_lt_cw(&self, other: &IntervalTuple) -> Result<bool, IntervalError> {
        Ok(self.zip_check(other)?.all(|(a, b)| a.lt_cw(b)))
    }
}

impl fmt::Display for IntervalTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            fmt::Display::fmt(t, f)?;
        }
        write!(f, ")")
    }
}
