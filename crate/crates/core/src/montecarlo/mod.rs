//! Monte Carlo estimates for the discrete-time counterpart: each particle
//! lives one generation and its children follow the embedded jump chain, so
//! a particle at `x` has a geometric number of children with mean
//! `λ Σ_y k_xy`, each placed at `y` with probability proportional to `k_xy`.
//!
//! Infinite-time events are replaced by proxies: global survival means the
//! population reached `N` or was alive at generation `G`; local survival in
//! `A` means at least `V` distinct generations with a particle in `A`, one
//! of them after `G/2`. Once the population exceeds `N` only the `N`
//! particles nearest to `A` are kept.

mod bracket;
mod estimate;
mod space;
mod stats;
mod trial;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bracket::{classify_lambda, lambda_w_bracket, Bracket, BracketPolicy, BracketStep, Classification, StopReason};
pub use estimate::{estimate, estimate_global, run_trials, SurvivalReport};
pub use space::{LumpedSpace, Space, Target};
pub use stats::{wilson, SurvivalEstimate, Z95};
pub use trial::{mix64, run_trial, sample_offspring, trial_rng, Fate, HitStatus, MCConfig, Mode, Verdict};

use crate::kernels::{truncate_with_cap, KernelError, RateKernel, Vertex};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonteCarloError {
    #[error("config field {0} must be at least 1")]
    InvalidConfig(&'static str),
    #[error("lambda must be finite and nonnegative, got {0}")]
    InvalidLambda(f64),
    #[error("invalid lambda range ({0}, {1})")]
    InvalidRange(f64, f64),
    #[error("no survival sign change on ({lo}, {hi}): {at_lo:?} at the lower end, {at_hi:?} at the upper end")]
    NoSignChange {
        lo: f64,
        hi: f64,
        at_lo: Classification,
        at_hi: Classification,
    },
    #[error("vertex {0} is not in the kernel")]
    UnknownVertex(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Target set given by explicit vertices or a ball around the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Vertices(Vec<Vertex>),
    OriginBall(u64),
}

/// Where a simulation ran.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SimRoute {
    /// Class counts on the radial quotient.
    Lumped,
    Vertex,
}

/// Largest origin ball enumerated for vertex-level targets.
pub const TARGET_VERTEX_CAP: usize = 1 << 20;

/// A rate kernel prepared for simulation. When the kernel is radially
/// lumpable and the target is a union of distance classes, trials run on
/// class counts, which have the same law as the vertex process seen
/// through the classes.
pub struct KernelSimulator {
    kernel: RateKernel,
    lumped: Option<LumpedSpace>,
}

impl KernelSimulator {
    /// `depth` bounds the precomputed quotient rows; it should exceed the
    /// start level plus the largest generation count used.
    pub fn new(kernel: &RateKernel, depth: u64) -> Self {
        Self {
            kernel: kernel.clone(),
            lumped: kernel.radial_quotient().map(|q| LumpedSpace::new(q, depth)),
        }
    }

    /// Quotient rows for `config`'s horizon under `policy`'s escalation.
    pub fn for_budget(kernel: &RateKernel, start: &Vertex, config: &MCConfig, policy: &BracketPolicy) -> Self {
        let level = kernel
            .radial_quotient()
            .and_then(|q| q.level_of(start))
            .unwrap_or(0);
        let gens = config.max_generations.max(policy.generation_cap);
        Self::new(kernel, level + u64::from(gens) + 1)
    }

    pub fn kernel(&self) -> &RateKernel {
        &self.kernel
    }

    fn start_level(&self, start: &Vertex) -> Result<Option<(&LumpedSpace, u64)>, MonteCarloError> {
        if !self.kernel.contains(start) {
            return Err(MonteCarloError::UnknownVertex(start.to_string()));
        }
        Ok(self
            .lumped
            .as_ref()
            .and_then(|s| s.quotient().level_of(start).map(|l| (s, l))))
    }

    /// Levels covered by `target` when it is a union of whole classes.
    fn target_levels(&self, space: &LumpedSpace, target: &TargetSpec) -> Option<Vec<u64>> {
        let q = space.quotient();
        match target {
            TargetSpec::OriginBall(r) => Some((0..=*r).collect()),
            TargetSpec::Vertices(vs) => {
                let mut per_level = std::collections::BTreeMap::<u64, u128>::new();
                let mut distinct = vs.clone();
                distinct.sort();
                distinct.dedup();
                for v in &distinct {
                    *per_level.entry(q.level_of(v)?).or_insert(0) += 1;
                }
                per_level
                    .iter()
                    .all(|(&l, &n)| q.class_size(l) == n)
                    .then(|| per_level.into_keys().collect())
            }
        }
    }

    fn target_vertices(&self, target: &TargetSpec) -> Result<Vec<Vertex>, MonteCarloError> {
        match target {
            TargetSpec::Vertices(vs) => {
                if let Some(v) = vs.iter().find(|v| !self.kernel.contains(v)) {
                    return Err(MonteCarloError::UnknownVertex(v.to_string()));
                }
                Ok(vs.clone())
            }
            TargetSpec::OriginBall(r) => {
                let radius = usize::try_from(*r).unwrap_or(usize::MAX);
                let ball = truncate_with_cap(&self.kernel, &self.kernel.origin(), radius, TARGET_VERTEX_CAP)?;
                Ok(ball.vertices().to_vec())
            }
        }
    }

    pub fn route_for(&self, start: &Vertex, target: &TargetSpec) -> Result<SimRoute, MonteCarloError> {
        Ok(match self.start_level(start)? {
            Some((space, _)) if self.target_levels(space, target).is_some() => SimRoute::Lumped,
            _ => SimRoute::Vertex,
        })
    }

    pub fn estimate(
        &self,
        lambda: f64,
        start: &Vertex,
        target: &TargetSpec,
        config: &MCConfig,
    ) -> Result<(SurvivalReport, SimRoute), MonteCarloError> {
        if let Some((space, level)) = self.start_level(start)? {
            if let Some(levels) = self.target_levels(space, target) {
                let t = space.target(levels);
                return Ok((estimate(space, lambda, &level, &t, config)?, SimRoute::Lumped));
            }
        }
        let vertices = self.target_vertices(target)?;
        let t = Space::target(&self.kernel, vertices);
        Ok((estimate(&self.kernel, lambda, start, &t, config)?, SimRoute::Vertex))
    }

    pub fn lambda_w_bracket(
        &self,
        start: &Vertex,
        range: (f64, f64),
        config: &MCConfig,
        rounds: u32,
        policy: &BracketPolicy,
    ) -> Result<Bracket, MonteCarloError> {
        match self.start_level(start)? {
            Some((space, level)) => lambda_w_bracket(space, &level, range, config, rounds, policy),
            None => lambda_w_bracket(&self.kernel, start, range, config, rounds, policy),
        }
    }
}

/// Default search range for the global critical parameter: from `1/B`,
/// below which extinction is certain, to a little above an upper bound on
/// the local one.
pub fn default_bracket_range(kernel: &RateKernel, lambda_s_upper: f64) -> (f64, f64) {
    (1.0 / kernel.row_sum_bound(), 1.1 * lambda_s_upper)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn routes_by_target_shape() {
        let k = RateKernel::tree(3, 0.0).unwrap();
        let sim = KernelSimulator::new(&k, 50);
        let o = k.origin();
        assert_eq!(sim.route_for(&o, &TargetSpec::Vertices(vec![o.clone()])).unwrap(), SimRoute::Lumped);
        assert_eq!(sim.route_for(&o, &TargetSpec::OriginBall(2)).unwrap(), SimRoute::Lumped);
        let children = (0..3).map(|i| Vertex::tree(&[i])).collect();
        assert_eq!(sim.route_for(&o, &TargetSpec::Vertices(children)).unwrap(), SimRoute::Lumped);
        let one = TargetSpec::Vertices(vec![Vertex::tree(&[1])]);
        assert_eq!(sim.route_for(&o, &one).unwrap(), SimRoute::Vertex);
        assert!(sim.route_for(&Vertex::Line(3), &one).is_err());
    }

    #[test]
    fn lumped_and_vertex_routes_agree_on_a_small_tree() {
        let k = RateKernel::tree(3, 0.0).unwrap();
        let sim = KernelSimulator::new(&k, 100);
        let cfg = MCConfig { trials: 20_000, max_generations: 30, population_cap: 200, seed: 5, ..Default::default() };
        let o = k.origin();
        let (lumped, route) = sim.estimate(0.3, &o, &TargetSpec::OriginBall(0), &cfg).unwrap();
        assert_eq!(route, SimRoute::Lumped);
        let t = Space::target(&k, vec![o.clone()]);
        let vertex = estimate(&k, 0.3, &o, &t, &cfg).unwrap();
        assert!(lumped.global.overlaps(&vertex.global), "{lumped:?} {vertex:?}");
    }
}
