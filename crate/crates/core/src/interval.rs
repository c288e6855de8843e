use serde::{Deserialize, Serialize};

/// Closed interval `[lo, hi]` carrying an estimate with its uncertainty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    /// Panics if `lo > hi` or either end is NaN.
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "interval [{lo}, {hi}] is reversed or NaN");
        Self { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Self::new(x, x)
    }

    /// `[x - r, x + r]`.
    pub fn around(x: f64, r: f64) -> Self {
        Self::new(x - r, x + r)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64, slack: f64) -> bool {
        self.lo - slack <= x && x <= self.hi + slack
    }

    pub fn overlaps(&self, other: &Self, slack: f64) -> bool {
        self.lo <= other.hi + slack && other.lo <= self.hi + slack
    }

    /// Every point of `self` is below every point of `other`, by more than `slack`.
    pub fn strictly_below(&self, other: &Self, slack: f64) -> bool {
        self.hi + slack < other.lo
    }

    /// Some point of `self` is at most some point of `other`, up to `slack`.
    pub fn possibly_le(&self, other: &Self, slack: f64) -> bool {
        self.lo <= other.hi + slack
    }

    /// Some point of `self` is below some point of `other` by more than `slack`.
    pub fn possibly_lt(&self, other: &Self, slack: f64) -> bool {
        self.lo + slack < other.hi
    }

    pub fn min(&self, other: &Self) -> Self {
        Self::new(self.lo.min(other.lo), self.hi.min(other.hi))
    }
}
