use serde::Serialize;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Wilson score interval for `successes` out of `trials` at quantile `z`.
pub fn wilson(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes >= trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Frequency of an event over independent trials, with a 95% Wilson
/// interval. Trials whose outcome is undecided count as failures for the
/// frequency and the lower end, and as successes for the upper end.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SurvivalEstimate {
    pub successes: u64,
    pub undecided: u64,
    pub trials: u64,
    pub frequency: f64,
    pub lo: f64,
    pub hi: f64,
}

impl SurvivalEstimate {
    pub fn new(successes: u64, undecided: u64, trials: u64) -> Self {
        let (lo, _) = wilson(successes, trials, Z95);
        let (_, hi) = wilson(successes + undecided, trials, Z95);
        Self {
            successes,
            undecided,
            trials,
            frequency: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
            lo,
            hi,
        }
    }

    /// Whether `p` lies in the Wilson interval at `z` standard deviations.
    pub fn within_band(&self, p: f64, z: f64) -> bool {
        let (lo, _) = wilson(self.successes, self.trials, z);
        let (_, hi) = wilson(self.successes + self.undecided, self.trials, z);
        lo <= p && p <= hi
    }

    pub fn overlaps(&self, other: &Self) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    /// The intervals are disjoint with `self` entirely below `other`.
    pub fn separated_below(&self, other: &Self) -> bool {
        self.hi < other.lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_values() {
        // 40/100: center 0.4037, half-width 0.0943
        let (lo, hi) = wilson(40, 100, Z95);
        assert!((lo - 0.30940).abs() < 1e-5 && (hi - 0.49800).abs() < 1e-5, "{lo} {hi}");
        let (lo, hi) = wilson(0, 4000, Z95);
        assert_eq!(lo, 0.0);
        assert!((hi - Z95 * Z95 / (4000.0 + Z95 * Z95)).abs() < 1e-15);
    }

    #[test]
    fn undecided_widen_upper_end_only() {
        let a = SurvivalEstimate::new(10, 0, 100);
        let b = SurvivalEstimate::new(10, 20, 100);
        assert_eq!(a.lo, b.lo);
        assert!(b.hi > a.hi);
        assert_eq!(a.frequency, b.frequency);
    }

    proptest! {
        #[test]
        fn frequency_inside_interval(n in 1u64..100_000, k in 0u64..100_000, u in 0u64..1000) {
            let s = k % (n + 1);
            let u = u.min(n - s);
            let e = SurvivalEstimate::new(s, u, n);
            prop_assert!(e.lo <= e.frequency && e.frequency <= e.hi);
            prop_assert!(0.0 <= e.lo && e.hi <= 1.0);
        }
    }
}
