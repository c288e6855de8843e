use serde::Serialize;

use super::estimate::estimate_global;
use super::space::Space;
use super::stats::{wilson, Z95};
use super::trial::MCConfig;
use super::MonteCarloError;
use crate::Interval;

/// Decision rule for one `λ` and the escalation budget.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BracketPolicy {
    /// A `λ` survives when the lower Wilson bound of the survival frequency
    /// exceeds this, and dies when the upper bound is below it.
    pub threshold: f64,
    /// Each escalation multiplies trials by 4 and generations by 2.
    pub max_escalations: u32,
    pub trial_cap: u64,
    pub generation_cap: u32,
}

impl Default for BracketPolicy {
    fn default() -> Self {
        Self {
            threshold: 1e-3,
            max_escalations: 2,
            trial_cap: 1 << 20,
            generation_cap: 3200,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Classification {
    Survives,
    Extinct,
    /// `λ · sup row sum ≤ 1`: every particle has at most one child on
    /// average, so the population dies out almost surely.
    ExtinctByMeanBound,
    Undecided,
}

impl Classification {
    fn survives(self) -> Option<bool> {
        match self {
            Self::Survives => Some(true),
            Self::Extinct | Self::ExtinctByMeanBound => Some(false),
            Self::Undecided => None,
        }
    }
}

/// One classification attempt.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BracketStep {
    pub lambda: f64,
    pub trials: u64,
    pub max_generations: u32,
    /// Reached the population cap.
    pub capped: u64,
    /// Below the cap but alive at the horizon.
    pub alive_at_horizon: u64,
    pub class: Classification,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum StopReason {
    RoundsExhausted,
    /// Escalation ran out at this `λ`.
    Undecidable(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Bracket {
    /// Lower end classified extinct, upper end surviving.
    pub interval: Interval,
    pub rounds: u32,
    pub stop: StopReason,
    pub steps: Vec<BracketStep>,
}

/// Classifies global survival at `lambda`, escalating the budget while the
/// evidence is inconclusive. Trials reaching the cap count as survivals for
/// the lower bound; trials still alive below the cap at the horizon count
/// towards the upper bound only.
pub fn classify_lambda<S: Space>(
    space: &S,
    start: &S::Site,
    lambda: f64,
    config: &MCConfig,
    policy: &BracketPolicy,
    steps: &mut Vec<BracketStep>,
) -> Result<Classification, MonteCarloError> {
    if lambda * space.row_sum_bound() <= 1.0 {
        steps.push(BracketStep {
            lambda,
            trials: 0,
            max_generations: 0,
            capped: 0,
            alive_at_horizon: 0,
            class: Classification::ExtinctByMeanBound,
        });
        return Ok(Classification::ExtinctByMeanBound);
    }
    let mut cfg = *config;
    for level in 0..=policy.max_escalations {
        if level > 0 {
            let trials = cfg.trials.saturating_mul(4).min(policy.trial_cap.max(config.trials));
            let gens = cfg.max_generations.saturating_mul(2).min(policy.generation_cap.max(config.max_generations));
            if trials == cfg.trials && gens == cfg.max_generations {
                break;
            }
            cfg.trials = trials;
            cfg.max_generations = gens;
        }
        let r = estimate_global(space, lambda, start, &cfg)?;
        let (lo, _) = wilson(r.capped, r.trials, Z95);
        let (_, hi) = wilson(r.capped + r.alive_at_horizon, r.trials, Z95);
        let class = if lo > policy.threshold {
            Classification::Survives
        } else if hi < policy.threshold {
            Classification::Extinct
        } else {
            Classification::Undecided
        };
        steps.push(BracketStep {
            lambda,
            trials: cfg.trials,
            max_generations: cfg.max_generations,
            capped: r.capped,
            alive_at_horizon: r.alive_at_horizon,
            class,
        });
        if class != Classification::Undecided {
            return Ok(class);
        }
    }
    Ok(Classification::Undecided)
}

/// Bisection for the global critical parameter over `range`.
pub fn lambda_w_bracket<S: Space>(
    space: &S,
    start: &S::Site,
    range: (f64, f64),
    config: &MCConfig,
    rounds: u32,
    policy: &BracketPolicy,
) -> Result<Bracket, MonteCarloError> {
    config.validate()?;
    let (mut lo, mut hi) = range;
    if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi) {
        return Err(MonteCarloError::InvalidRange(lo, hi));
    }
    let mut steps = Vec::new();
    let at_lo = classify_lambda(space, start, lo, config, policy, &mut steps)?;
    let at_hi = classify_lambda(space, start, hi, config, policy, &mut steps)?;
    if at_lo.survives() != Some(false) || at_hi.survives() != Some(true) {
        return Err(MonteCarloError::NoSignChange { lo, hi, at_lo, at_hi });
    }
    let mut stop = StopReason::RoundsExhausted;
    let mut done = 0;
    for _ in 0..rounds {
        let mid = 0.5 * (lo + hi);
        done += 1;
        match classify_lambda(space, start, mid, config, policy, &mut steps)?.survives() {
            Some(true) => hi = mid,
            Some(false) => lo = mid,
            None => {
                stop = StopReason::Undecidable(mid);
                break;
            }
        }
    }
    Ok(Bracket {
        interval: Interval::new(lo, hi),
        rounds: done,
        stop,
        steps,
    })
}
