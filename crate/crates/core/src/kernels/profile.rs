use serde::{Deserialize, Serialize};

use super::KernelError;

/// Radial rate profile `n -> k_n` for line kernels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// `k_n = value`.
    Constant { value: f64 },
    /// `k_n = limit + (start - limit) * rate^n`, nonincreasing (`start >= limit`).
    DecayTo { limit: f64, start: f64, rate: f64 },
    /// `k_n = limit - (limit - start) * rate^n`, nondecreasing (`start <= limit`).
    IncreaseTo { limit: f64, start: f64, rate: f64 },
    /// `k_n = scale / (n^2 + 1)`.
    InverseSquare {
        #[serde(default = "one")]
        scale: f64,
    },
    /// Piecewise constant: block `m` (from 0) has rate `limit + 1/(m+1)`.
    ///
    /// Block lengths are taken from `lengths`; past the end of the list each
    /// block gets the shortest length whose path restriction has local
    /// critical parameter below `1/limit` (see [`Profile::minimal_block_length`]).
    Blocks {
        limit: f64,
        #[serde(default)]
        lengths: Vec<u64>,
    },
}

fn one() -> f64 {
    1.0
}

impl Profile {
    pub fn constant(value: f64) -> Self {
        Profile::Constant { value }
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        let bad = |what: &str| Err(KernelError::InvalidProfile(what.to_string()));
        let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
        match *self {
            Profile::Constant { value } => {
                if !finite_nonneg(value) {
                    return bad("constant value must be finite and nonnegative");
                }
            }
            Profile::DecayTo { limit, start, rate } => {
                if !(finite_nonneg(limit) && start.is_finite() && start >= limit) {
                    return bad("decay_to needs 0 <= limit <= start");
                }
                if !(0.0..1.0).contains(&rate) {
                    return bad("decay_to rate must lie in [0, 1)");
                }
            }
            Profile::IncreaseTo { limit, start, rate } => {
                if !(finite_nonneg(start) && limit.is_finite() && start <= limit) {
                    return bad("increase_to needs 0 <= start <= limit");
                }
                if !(0.0..1.0).contains(&rate) {
                    return bad("increase_to rate must lie in [0, 1)");
                }
            }
            Profile::InverseSquare { scale } => {
                if !finite_nonneg(scale) {
                    return bad("inverse_square scale must be finite and nonnegative");
                }
            }
            Profile::Blocks { limit, ref lengths } => {
                if !(limit.is_finite() && limit > 0.0) {
                    return bad("blocks limit must be finite and positive");
                }
                if lengths.contains(&0) {
                    return bad("block lengths must be positive");
                }
            }
        }
        Ok(())
    }

    /// The rate `k_n`.
    pub fn value(&self, n: u64) -> f64 {
        match *self {
            Profile::Constant { value } => value,
            Profile::DecayTo { limit, start, rate } => limit + (start - limit) * pow(rate, n),
            Profile::IncreaseTo { limit, start, rate } => limit - (limit - start) * pow(rate, n),
            Profile::InverseSquare { scale } => {
                let n = n as f64;
                scale / (n * n + 1.0)
            }
            Profile::Blocks { limit, .. } => limit + 1.0 / (self.block_index(n) as f64 + 1.0),
        }
    }

    /// `sup_{n >= n0} k_n`.
    pub fn sup_from(&self, n0: u64) -> f64 {
        match *self {
            Profile::Constant { value } => value,
            Profile::IncreaseTo { limit, .. } => limit,
            Profile::DecayTo { .. } | Profile::InverseSquare { .. } | Profile::Blocks { .. } => {
                self.value(n0)
            }
        }
    }

    /// `inf_{n >= n0} k_n`.
    pub fn inf_from(&self, n0: u64) -> f64 {
        match *self {
            Profile::Constant { value } => value,
            Profile::IncreaseTo { .. } => self.value(n0),
            Profile::DecayTo { limit, .. } | Profile::Blocks { limit, .. } => limit,
            Profile::InverseSquare { .. } => 0.0,
        }
    }

    /// `limsup_n k_n`.
    pub fn limsup(&self) -> f64 {
        match *self {
            Profile::Constant { value } => value,
            Profile::DecayTo { limit, .. }
            | Profile::IncreaseTo { limit, .. }
            | Profile::Blocks { limit, .. } => limit,
            Profile::InverseSquare { .. } => 0.0,
        }
    }

    /// Shortest block length `l` such that the path of `l` vertices with
    /// nearest-neighbour rates `(limit + 1/(m+1))/2` has spectral radius
    /// above `limit`, i.e. `(limit + 1/(m+1)) cos(pi/(l+1)) > limit`.
    pub fn minimal_block_length(limit: f64, block: u64) -> u64 {
        let a = limit + 1.0 / (block as f64 + 1.0);
        let angle = (limit / a).acos();
        // smallest l with pi/(l+1) < angle
        let mut l = (std::f64::consts::PI / angle - 1.0).floor().max(1.0) as u64;
        while (std::f64::consts::PI / (l as f64 + 1.0)).cos() * a <= limit {
            l += 1;
        }
        l
    }

    /// Length of block `m` of a `Blocks` profile.
    pub fn block_length(&self, m: u64) -> Option<u64> {
        match self {
            Profile::Blocks { limit, lengths } => Some(
                lengths
                    .get(m as usize)
                    .copied()
                    .unwrap_or_else(|| Self::minimal_block_length(*limit, m)),
            ),
            _ => None,
        }
    }

    fn block_index(&self, n: u64) -> u64 {
        let mut start = 0u64;
        let mut m = 0u64;
        loop {
            let len = self.block_length(m).unwrap_or(u64::MAX);
            if n < start.saturating_add(len) {
                return m;
            }
            start += len;
            m += 1;
        }
    }
}

fn pow(rate: f64, n: u64) -> f64 {
    if n > i32::MAX as u64 {
        0.0
    } else {
        rate.powi(n as i32)
    }
}
