use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma, Geometric, Poisson};
use serde::{Deserialize, Serialize};

use super::space::{Space, Target};
use super::MonteCarloError;

/// Survival proxies and sampling budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MCConfig {
    pub trials: u64,
    pub max_generations: u32,
    pub population_cap: u64,
    pub local_visit_threshold: u32,
    pub seed: u64,
}

impl Default for MCConfig {
    fn default() -> Self {
        Self {
            trials: 10_000,
            max_generations: 200,
            population_cap: 10_000,
            local_visit_threshold: 25,
            seed: 0,
        }
    }
}

impl MCConfig {
    pub fn validate(&self) -> Result<(), MonteCarloError> {
        let bad = |field: &'static str| Err(MonteCarloError::InvalidConfig(field));
        if self.trials == 0 {
            return bad("trials");
        }
        if self.max_generations == 0 {
            return bad("max_generations");
        }
        if self.population_cap == 0 {
            return bad("population_cap");
        }
        if self.local_visit_threshold == 0 {
            return bad("local_visit_threshold");
        }
        Ok(())
    }
}

/// SplitMix64 finalizer applied to `seed + golden * (index + 1)`.
pub fn mix64(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trial_rng(seed: u64, trial_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(seed, trial_index))
}

/// Children of one particle at `x` in the discrete-time counterpart.
/// Each step the particle dies with probability `1/(1+r)`, `r = λ Σ_y k_xy`,
/// or places a child at `y` with probability `λ k_xy / (1+r)`.
pub fn sample_offspring<S: Space, R: Rng + ?Sized>(space: &S, lambda: f64, x: &S::Site, rng: &mut R) -> Vec<S::Site> {
    let row = space.row(x);
    let total: f64 = row.iter().map(|(_, k)| k).sum();
    let r = lambda * total;
    let mut children = Vec::new();
    if r <= 0.0 {
        return children;
    }
    loop {
        let u: f64 = rng.random::<f64>() * (1.0 + r);
        if u < 1.0 {
            return children;
        }
        let mut pick = (u - 1.0) / lambda;
        let mut chosen = &row[row.len() - 1].0;
        for (y, k) in row.iter() {
            if pick < *k {
                chosen = y;
                break;
            }
            pick -= k;
        }
        children.push(chosen.clone());
    }
}

/// Total number of children of `count` independent particles with total
/// birth rate `r` each: negative binomial, sampled as a Gamma–Poisson mixture.
fn total_children<R: Rng + ?Sized>(count: u64, r: f64, rng: &mut R) -> u64 {
    if r <= 0.0 || count == 0 {
        return 0;
    }
    if count == 1 {
        return Geometric::new(1.0 / (1.0 + r)).expect("p in (0,1]").sample(rng);
    }
    let g = Gamma::new(count as f64, r).expect("positive shape and scale").sample(rng);
    if g <= 0.0 {
        return 0;
    }
    Poisson::new(g).expect("positive mean").sample(rng) as u64
}

/// Adds the children of `count` particles at one site to `next`.
fn breed<T: Clone + Ord, R: Rng + ?Sized>(
    row: &[(T, f64)],
    lambda: f64,
    count: u64,
    next: &mut BTreeMap<T, u64>,
    rng: &mut R,
) {
    let total_rate: f64 = row.iter().map(|(_, k)| k).sum();
    let mut left = total_children(count, lambda * total_rate, rng);
    let mut mass = total_rate;
    for (i, (y, k)) in row.iter().enumerate() {
        if left == 0 {
            break;
        }
        let n = if i + 1 == row.len() || *k >= mass {
            left
        } else {
            Binomial::new(left, (k / mass).clamp(0.0, 1.0)).expect("valid binomial").sample(rng)
        };
        if n > 0 {
            *next.entry(y.clone()).or_insert(0) += n;
        }
        left -= n;
        mass -= k;
    }
}

/// Keeps the `cap` particles nearest to the target, by rank and then by site.
/// Dropping particles yields a sub-process of the original one, so survival
/// seen after a cut is also survival of the uncut process.
fn cut_to_cap<T: Clone + Ord>(pop: BTreeMap<T, u64>, cap: u64, target: &Target<'_, T>) -> BTreeMap<T, u64> {
    let mut sites: Vec<(u64, T, u64)> = pop.into_iter().map(|(s, c)| (target.rank(&s), s, c)).collect();
    sites.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    let mut kept = BTreeMap::new();
    let mut room = cap;
    for (_, s, c) in sites {
        if room == 0 {
            break;
        }
        let take = c.min(room);
        kept.insert(s, take);
        room -= take;
    }
    kept
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Fate {
    /// Population empty at this generation, before reaching the cap.
    Extinct(u32),
    /// Population first reached the cap at this generation.
    Capped(u32),
    /// Nonzero and below the cap at the last generation.
    AliveAtHorizon,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum HitStatus {
    /// First generation with a particle in the target.
    Hit(u32),
    /// The process died out without reaching the target.
    NeverHit,
    /// Still alive, target not reached yet.
    Undecided,
}

/// What one trial observed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub fate: Fate,
    pub hit: HitStatus,
    /// At least `V` distinct generations with a particle in the target, one
    /// of them after `G/2`.
    pub local: bool,
    pub visit_generations: u32,
    pub generations_run: u32,
}

impl Verdict {
    pub fn global_survive(&self) -> bool {
        !matches!(self.fate, Fate::Extinct(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Track target visits for the local and never-hit events.
    Full,
    /// Stop at the cap; only the global event is needed.
    GlobalOnly,
}

/// One trial from a single particle at `start`, with streams derived from
/// `(config.seed, trial_index)`.
pub fn run_trial<S: Space>(
    space: &S,
    lambda: f64,
    start: &S::Site,
    target: &Target<'_, S::Site>,
    config: &MCConfig,
    trial_index: u64,
    mode: Mode,
) -> Verdict {
    let mut rng = trial_rng(config.seed, trial_index);
    let g_max = config.max_generations;
    let half = g_max / 2;
    let needed = config.local_visit_threshold;

    let mut pop = BTreeMap::from([(start.clone(), 1u64)]);
    let mut visits = 0u32;
    let mut last_visit = None;
    let mut first_hit = None;
    let mut capped = None;
    let mut extinct = None;
    let mut generation = 0u32;

    let mut record = |gen: u32, pop: &BTreeMap<S::Site, u64>, visits: &mut u32, last: &mut Option<u32>| {
        if mode == Mode::Full && pop.keys().any(|s| target.contains(s)) {
            *visits += 1;
            *last = Some(gen);
            first_hit.get_or_insert(gen);
        }
    };
    record(0, &pop, &mut visits, &mut last_visit);
    if config.population_cap <= 1 {
        capped = Some(0);
    }

    while generation < g_max {
        if capped.is_some() {
            let done = visits >= needed && last_visit.is_some_and(|l| l > half);
            let hopeless = visits + (g_max - generation) < needed;
            if mode == Mode::GlobalOnly || done || hopeless {
                break;
            }
        }
        generation += 1;
        let mut next = BTreeMap::new();
        for (site, &count) in &pop {
            breed(&space.row(site), lambda, count, &mut next, &mut rng);
        }
        if next.is_empty() {
            extinct = Some(generation);
            pop = next;
            break;
        }
        let total = next.values().fold(0u64, |a, &c| a.saturating_add(c));
        record(generation, &next, &mut visits, &mut last_visit);
        if total >= config.population_cap && capped.is_none() {
            capped = Some(generation);
        }
        pop = if total > config.population_cap {
            cut_to_cap(next, config.population_cap, target)
        } else {
            next
        };
    }

    let fate = match (capped, extinct) {
        (Some(g), _) => Fate::Capped(g),
        (None, Some(g)) => Fate::Extinct(g),
        (None, None) => Fate::AliveAtHorizon,
    };
    let hit = match first_hit {
        Some(g) => HitStatus::Hit(g),
        None if pop.is_empty() && capped.is_none() => HitStatus::NeverHit,
        None => HitStatus::Undecided,
    };
    Verdict {
        fate,
        hit,
        local: visits >= needed && last_visit.is_some_and(|l| l > half),
        visit_generations: visits,
        generations_run: generation,
    }
}
