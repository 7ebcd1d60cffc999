//! Scalar helpers and small dense Hermitian linear algebra.
//!
//! Everything here is a pure function of its inputs.

mod linalg;

pub use linalg::{hermitian_eigensystem, psd_sqrt, Eigensystem, HermitianOperator, MAX_DIM};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack accepted on either side of `[0, 1]` before a value is rejected.
const PROBABILITY_SLACK: f64 = 1e-12;

/// A real number in `[0, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const HALF: Probability = Probability(0.5);
    pub const ONE: Probability = Probability(1.0);

    /// Values within `1e-12` outside the unit interval are clamped, anything
    /// further out (or NaN) is rejected.
    pub fn new(value: f64) -> Result<Self> {
        if !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&value) {
            return Err(Error::ProbabilityOutOfRange(value));
        }
        Ok(Probability(value.clamp(0.0, 1.0)))
    }

    /// Clamps into `[0, 1]`; NaN maps to 0.
    pub fn saturating(value: f64) -> Self {
        if value.is_nan() {
            Probability(0.0)
        } else {
            Probability(value.clamp(0.0, 1.0))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn complement(self) -> Probability {
        Probability(1.0 - self.0)
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Probability::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

impl std::fmt::Display for Probability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Binary Shannon entropy in bits, with `h(0) = h(1) = 0`.
pub fn binary_entropy(p: Probability) -> f64 {
    let p = p.value();
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - p;
    let h = -p * p.log2() - q * q.log2();
    h.clamp(0.0, 1.0)
}

/// Finds the crossing of a function that goes from non-negative at `lo` to
/// non-positive at `hi`.
///
/// The returned point is within `tol` of the last sign change seen by the
/// bisection. The sequence of evaluations depends only on the inputs.
pub fn bisect_decreasing<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "bisection interval",
            reason: format!("need lo < hi and tol > 0 (lo={lo}, hi={hi}, tol={tol})"),
        });
    }
    let (f_lo, f_hi) = (f(lo), f(hi));
    if !(f_lo >= 0.0 && f_hi <= 0.0) {
        return Err(Error::NoBracket { f_lo, f_hi });
    }

    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > tol {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo + 0.5 * (hi - lo))
}
