//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All solvers, bounds and simulators are written against [`Scalar`] so the
//! same code runs in `f64` (the default, see the aliases in the crate root)
//! or `f32`. Tolerances are per-type because a 1e-9 payoff tolerance is below
//! `f32` resolution.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Absolute tolerance used for payoff comparisons (best-reply membership,
    /// argmax ties, feasibility residuals).
    fn payoff_tol() -> Self;

    /// Pivot / reduced-cost tolerance inside the simplex solver.
    fn lp_tol() -> Self;

    /// Tolerance used when checking that a probability vector sums to one.
    fn prob_tol() -> Self;

    /// Lossless-enough conversion from an `f64` literal.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn payoff_tol() -> Self {
        1e-9
    }
    fn lp_tol() -> Self {
        1e-11
    }
    fn prob_tol() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    fn payoff_tol() -> Self {
        1e-5
    }
    fn lp_tol() -> Self {
        1e-6
    }
    fn prob_tol() -> Self {
        1e-5
    }
}

/// `true` when `a` and `b` agree within `tol` (infinities compare by sign).
pub fn approx_eq<S: Scalar>(a: S, b: S, tol: S) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= tol
}

/// Sum of a slice in index order.
pub fn total<S: Scalar>(xs: &[S]) -> S {
    xs.iter().copied().fold(S::zero(), |acc, x| acc + x)
}

/// Validates a probability vector: nonnegative entries summing to one within `tol`.
pub fn is_distribution<S: Scalar>(xs: &[S], tol: S) -> bool {
    !xs.is_empty()
        && xs.iter().all(|&x| x.is_finite() && x >= -tol)
        && (total(xs) - S::one()).abs() <= tol
}

/// Draws an index from a categorical distribution given a uniform draw `u` in `[0,1)`.
///
/// Falls back to the last index with positive mass when rounding leaves the
/// cumulative sum slightly below `u`.
pub fn sample_index<S: Scalar>(probs: &[S], u: S) -> usize {
    let mut acc = S::zero();
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > S::zero() {
            last_positive = i;
            acc = acc + p;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Ceiling that snaps values within a relative `1e-9` of an integer onto it,
/// so ratios such as `D / D` that land a few ulps above 1 are not bumped up.
pub fn snapped_ceil<S: Scalar>(x: S) -> S {
    let r = x.round();
    if (x - r).abs() <= S::of(1e-9) * S::one().max(r.abs()) {
        r
    } else {
        x.ceil()
    }
}
