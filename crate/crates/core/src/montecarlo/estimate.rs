use rayon::prelude::*;
use serde::Serialize;

use super::space::{Space, Target};
use super::stats::SurvivalEstimate;
use super::trial::{run_trial, Fate, HitStatus, MCConfig, Mode, Verdict};
use super::MonteCarloError;

/// Tallies of one batch of trials at a fixed `λ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SurvivalReport {
    pub lambda: f64,
    pub trials: u64,
    /// Reached the cap or the horizon with particles left.
    pub global: SurvivalEstimate,
    pub local: SurvivalEstimate,
    /// Died out without visiting the target; trials still alive without a
    /// visit are undecided.
    pub never_hit: SurvivalEstimate,
    pub capped: u64,
    pub alive_at_horizon: u64,
}

impl SurvivalReport {
    pub fn from_verdicts(lambda: f64, verdicts: &[Verdict]) -> Self {
        let n = verdicts.len() as u64;
        let count = |f: &dyn Fn(&Verdict) -> bool| verdicts.iter().filter(|v| f(v)).count() as u64;
        let capped = count(&|v| matches!(v.fate, Fate::Capped(_)));
        let alive = count(&|v| v.fate == Fate::AliveAtHorizon);
        let local = count(&|v| v.local);
        let never = count(&|v| v.hit == HitStatus::NeverHit);
        let undecided = count(&|v| v.hit == HitStatus::Undecided);
        Self {
            lambda,
            trials: n,
            global: SurvivalEstimate::new(capped + alive, 0, n),
            local: SurvivalEstimate::new(local, 0, n),
            never_hit: SurvivalEstimate::new(never, undecided, n),
            capped,
            alive_at_horizon: alive,
        }
    }

    /// Trials with an unresolved never-hit outcome.
    pub fn undecided_count(&self) -> u64 {
        self.never_hit.undecided
    }
}

/// Runs `config.trials` independent trials in parallel. The verdict of
/// trial `i` depends only on `(config.seed, i)`, and verdicts are collected
/// in index order, so the result does not depend on the worker count.
pub fn run_trials<S: Space>(
    space: &S,
    lambda: f64,
    start: &S::Site,
    target: &Target<'_, S::Site>,
    config: &MCConfig,
    mode: Mode,
) -> Result<Vec<Verdict>, MonteCarloError> {
    config.validate()?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(MonteCarloError::InvalidLambda(lambda));
    }
    Ok((0..config.trials)
        .into_par_iter()
        .map(|i| run_trial(space, lambda, start, target, config, i, mode))
        .collect())
}

pub fn estimate<S: Space>(
    space: &S,
    lambda: f64,
    start: &S::Site,
    target: &Target<'_, S::Site>,
    config: &MCConfig,
) -> Result<SurvivalReport, MonteCarloError> {
    let verdicts = run_trials(space, lambda, start, target, config, Mode::Full)?;
    Ok(SurvivalReport::from_verdicts(lambda, &verdicts))
}

/// Global survival only; trials stop at the cap.
pub fn estimate_global<S: Space>(
    space: &S,
    lambda: f64,
    start: &S::Site,
    config: &MCConfig,
) -> Result<SurvivalReport, MonteCarloError> {
    let target = Target::unranked(Vec::new());
    let verdicts = run_trials(space, lambda, start, &target, config, Mode::GlobalOnly)?;
    Ok(SurvivalReport::from_verdicts(lambda, &verdicts))
}
