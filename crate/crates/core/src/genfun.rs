//! First-return generating function `Φ(x,x|λ) = Σ_n φ^(n)_xx λ^n` and the
//! local critical parameter `λ_s = max{λ : Φ(x,x|λ) ≤ 1}`.
//!
//! Coefficients come from a dynamic program over paths (on the distance
//! quotient when the kernel is lumpable, otherwise on the vertex ball). When
//! the quotient is a birth–death chain, `Φ` itself is bracketed exactly by a
//! continued fraction whose tail is closed with the fixed points of the
//! homogeneous chains built from the infimum and supremum tail rates; this
//! gives certified values up to the radius of convergence.

use thiserror::Error;

use crate::kernels::{truncate, BirthDeathChain, FiniteKernel, KernelError, RateKernel, Vertex};
use crate::Interval;

/// Explicit chain depth used for the continued-fraction bracket.
const CHAIN_DEPTH: u64 = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenFunError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("series order must be at least 1")]
    InvalidOrder,
    #[error("lambda must be finite and nonnegative, got {0}")]
    InvalidLambda(f64),
    #[error("tolerance must be finite and positive, got {0}")]
    InvalidTolerance(f64),
    #[error("no return path to the center within {0} steps")]
    NoReturnPaths(usize),
    #[error("cannot decide Φ ≤ 1 inside [{lo}, {hi}]")]
    Inconclusive { lo: f64, hi: f64 },
}

/// How the path counts are computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// Distance quotient when available, vertex ball otherwise.
    Auto,
    /// Always the vertex ball of radius `order`.
    Vertex,
}

/// First-return coefficients `φ^(1..=N)` at a center vertex.
#[derive(Clone, Debug)]
pub struct PhiSeries {
    pub center: Vertex,
    /// `scaled[n] = φ^(n) / B^n`; index 0 is unused.
    scaled: Vec<f64>,
    /// Row-sum bound `B`, so that `φ^(n) ≤ B^n`.
    pub growth_bound: f64,
    chain: Option<BirthDeathChain>,
}

impl PhiSeries {
    pub fn order(&self) -> usize {
        self.scaled.len() - 1
    }

    /// `φ^(n)`; may overflow to infinity for large `n`.
    pub fn coefficient(&self, n: usize) -> f64 {
        if n == 0 || n > self.order() {
            return 0.0;
        }
        self.scaled[n] * self.growth_bound.powi(n as i32)
    }

    pub fn coefficients(&self) -> Vec<f64> {
        (1..=self.order()).map(|n| self.coefficient(n)).collect()
    }

    /// Whether `Φ` is bracketed exactly through a birth–death continued fraction.
    pub fn is_certified(&self) -> bool {
        self.chain.is_some()
    }

    /// Upper bound from the coefficients: `λ_s ≤ (φ^(n))^{-1/n}` for every `n`.
    pub fn coefficient_upper_bound(&self) -> Option<f64> {
        (1..=self.order())
            .filter(|&n| self.scaled[n] > 0.0)
            .map(|n| 1.0 / (self.growth_bound * self.scaled[n].powf(1.0 / n as f64)))
            .min_by(f64::total_cmp)
    }
}

/// Bound on the remainder `Σ_{n>N} φ^(n) λ^n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tail {
    Bounded(f64),
    /// No finite bound is available at this `λ`.
    Divergent,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhiValue {
    /// Partial sum `Σ_{n≤N} φ^(n) λ^n`.
    pub value: f64,
    pub tail: Tail,
    /// Certified lower bound on `Φ` (at least the partial sum, possibly infinite).
    pub lower: f64,
}

impl PhiValue {
    /// Certified upper bound on `Φ`, if finite.
    pub fn upper(&self) -> Option<f64> {
        match self.tail {
            Tail::Bounded(t) => Some(self.value + t),
            Tail::Divergent => None,
        }
    }
}

pub fn first_return_coeffs(kernel: &RateKernel, center: &Vertex, order: usize) -> Result<PhiSeries, GenFunError> {
    first_return_coeffs_with(kernel, center, order, Route::Auto)
}

pub fn first_return_coeffs_with(
    kernel: &RateKernel,
    center: &Vertex,
    order: usize,
    route: Route,
) -> Result<PhiSeries, GenFunError> {
    if order == 0 {
        return Err(GenFunError::InvalidOrder);
    }
    if !kernel.contains(center) {
        return Err(KernelError::InvalidVertex(center.to_string(), kernel.family().name()).into());
    }
    let bound = kernel.row_sum_bound();
    let quotient = match route {
        Route::Auto if *center == kernel.origin() => kernel.radial_quotient(),
        _ => None,
    };
    let (finite, chain) = match &quotient {
        Some(q) => {
            let mut chain = q.birth_death(CHAIN_DEPTH.max(order as u64));
            if let Some(c) = chain.as_mut() {
                c.trim_homogeneous();
            }
            (q.truncate(order)?, chain)
        }
        None => (truncate(kernel, center, order)?, None),
    };
    let scaled = scaled_first_returns(&finite, 0, order, bound);
    Ok(PhiSeries {
        center: center.clone(),
        scaled,
        growth_bound: bound,
        chain,
    })
}

/// `φ^(n)_cc` for `n = 1..=order` on a finite kernel.
pub fn first_return_finite(kernel: &FiniteKernel, center: usize, order: usize) -> Vec<f64> {
    let bound = kernel.max_row_sum();
    let scaled = scaled_first_returns(kernel, center, order, bound);
    let s = if bound > 0.0 { bound } else { 1.0 };
    (1..=order).map(|n| scaled[n] * s.powi(n as i32)).collect()
}

/// Path dynamic program with the walk mass killed on its return to the
/// center, rescaled by `1/B` per step to stay in range.
fn scaled_first_returns(kernel: &FiniteKernel, center: usize, order: usize, bound: f64) -> Vec<f64> {
    let scale = if bound > 0.0 { 1.0 / bound } else { 1.0 };
    let n = kernel.len();
    let mut mass = vec![0.0; n];
    let mut next = vec![0.0; n];
    mass[center] = 1.0;
    let mut out = vec![0.0; order + 1];
    for slot in out.iter_mut().skip(1) {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (x, &m) in mass.iter().enumerate() {
            if m != 0.0 {
                for &(y, r) in kernel.row(x) {
                    next[y] += m * r * scale;
                }
            }
        }
        *slot = next[center];
        next[center] = 0.0;
        std::mem::swap(&mut mass, &mut next);
    }
    out
}

/// Minimal nonnegative root of `h = λ b / (1 - λ c - λ f h)`: the
/// first-passage generating function one level down in the homogeneous chain
/// with rates `(stay, up, down) = (c, f, b)`.
fn homogeneous_passage(lambda: f64, (c, f, b): (f64, f64, f64)) -> Option<f64> {
    let a = 1.0 - lambda * c;
    if lambda == 0.0 || b == 0.0 {
        return Some(0.0);
    }
    if a <= 0.0 {
        return None;
    }
    let mut disc = a * a - 4.0 * lambda * lambda * f * b;
    if disc < 0.0 {
        // rounding at the branch point itself
        if disc < -8.0 * f64::EPSILON * a * a {
            return None;
        }
        disc = 0.0;
    }
    Some(2.0 * lambda * b / (a + disc.sqrt()))
}

/// Runs the continued fraction down from the deepest explicit level.
/// Returns `None` when a denominator is not positive.
fn passage_down(chain: &BirthDeathChain, lambda: f64, seed: f64) -> Option<f64> {
    let depth = chain.stay.len() - 1;
    let mut h = seed;
    for j in (1..=depth).rev() {
        let denom = 1.0 - lambda * chain.stay[j] - lambda * chain.up[j] * h;
        if denom <= 0.0 {
            return None;
        }
        h = lambda * chain.down[j] / denom;
    }
    Some(lambda * chain.stay[0] + lambda * chain.up[0] * h)
}

/// Certified `(lower, upper)` bounds on `Φ(0,0|λ)` for a birth–death chain.
/// The lower bound is `+∞` when `Φ` diverges; the upper bound is `None`
/// when no finite bound is available.
pub fn chain_first_return(chain: &BirthDeathChain, lambda: f64) -> (f64, Option<f64>) {
    let upper = homogeneous_passage(lambda, chain.tail.sup).and_then(|h| passage_down(chain, lambda, h));
    let lower = homogeneous_passage(lambda, chain.tail.inf)
        .and_then(|h| passage_down(chain, lambda, h))
        .unwrap_or(f64::INFINITY);
    (lower, upper)
}

pub fn phi_eval(series: &PhiSeries, lambda: f64) -> Result<PhiValue, GenFunError> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(GenFunError::InvalidLambda(lambda));
    }
    let step = series.growth_bound * lambda;
    let mut value = 0.0;
    let mut power = 1.0;
    for n in 1..=series.order() {
        power *= step;
        let c = series.scaled[n];
        if c != 0.0 {
            value += c * power;
        }
    }
    let (mut lower, mut tail) = (value, crude_tail(step, series.order()));
    if let Some(chain) = &series.chain {
        let (lo, hi) = chain_first_return(chain, lambda);
        lower = lower.max(lo);
        if let Some(h) = hi {
            let t = (h - value).max(0.0);
            tail = match tail {
                Tail::Bounded(c) if c < t => Tail::Bounded(c),
                _ => Tail::Bounded(t),
            };
        }
    }
    Ok(PhiValue { value, tail, lower })
}

fn crude_tail(step: f64, order: usize) -> Tail {
    if step < 1.0 {
        Tail::Bounded(step.powi(order as i32 + 1) / (1.0 - step))
    } else {
        Tail::Divergent
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    Below,
    Above,
    Unknown,
}

fn side(series: &PhiSeries, lambda: f64) -> Side {
    let Ok(v) = phi_eval(series, lambda) else { return Side::Unknown };
    if v.lower > 1.0 {
        return Side::Above;
    }
    match v.upper() {
        // No finite bound: treated as the upper side of the bracket.
        None => Side::Above,
        Some(u) if u <= 1.0 => Side::Below,
        Some(_) => Side::Unknown,
    }
}

/// Bisection for `λ_s = max{λ : Φ(center,center|λ) ≤ 1}`. The returned
/// interval has width at most `tol`.
pub fn lambda_s_phi(kernel: &RateKernel, center: &Vertex, order: usize, tol: f64) -> Result<Interval, GenFunError> {
    let series = first_return_coeffs(kernel, center, order)?;
    lambda_s_from_series(&series, tol)
}

pub fn lambda_s_from_series(series: &PhiSeries, tol: f64) -> Result<Interval, GenFunError> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(GenFunError::InvalidTolerance(tol));
    }
    let start = series
        .coefficient_upper_bound()
        .ok_or(GenFunError::NoReturnPaths(series.order()))?;
    let mut hi = start * (1.0 + 1e-12);
    let mut tries = 0;
    while side(series, hi) == Side::Below {
        hi *= 2.0;
        tries += 1;
        if tries > 64 {
            return Err(GenFunError::NoReturnPaths(series.order()));
        }
    }
    let mut lo = hi / 2.0;
    loop {
        match side(series, lo) {
            Side::Below => break,
            Side::Above => hi = lo,
            Side::Unknown => {}
        }
        lo /= 2.0;
        if lo < f64::MIN_POSITIVE {
            return Err(GenFunError::Inconclusive { lo: 0.0, hi });
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match side(series, mid) {
            Side::Below => lo = mid,
            Side::Above => hi = mid,
            Side::Unknown => return Err(GenFunError::Inconclusive { lo, hi }),
        }
    }
    Ok(Interval::new(lo, hi))
}

/// One term of the diagonal sequence `m^(n) = (K^n)_cc`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagonalTerm {
    pub n: usize,
    pub value: f64,
    /// `(m^(n))^{-1/n}`, an upper bound on `λ_s`; infinite when `m^(n) = 0`.
    pub estimate: f64,
}

pub fn matrix_power_diagonal(kernel: &FiniteKernel, center: usize, n_max: usize) -> Vec<DiagonalTerm> {
    let n = kernel.len();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    v[center] = 1.0;
    let mut log_scale = 0.0;
    let mut out = Vec::with_capacity(n_max);
    for step in 1..=n_max {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (x, &m) in v.iter().enumerate() {
            if m != 0.0 {
                for &(y, r) in kernel.row(x) {
                    next[y] += m * r;
                }
            }
        }
        let top = next.iter().copied().fold(0.0, f64::max);
        if top > 0.0 {
            next.iter_mut().for_each(|x| *x /= top);
            log_scale += top.ln();
        }
        std::mem::swap(&mut v, &mut next);
        let log_m = log_scale + v[center].ln();
        out.push(DiagonalTerm {
            n: step,
            value: log_m.exp(),
            estimate: (-log_m / step as f64).exp(),
        });
        if top == 0.0 {
            log_scale = f64::NEG_INFINITY;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{LineDomain, Patch, Profile};

    /// Catalan numbers: returns to 0 on ℤ with rates 1/2 after 2m steps.
    fn z_first_return_oracle(order: usize) -> Vec<f64> {
        let mut out = vec![0.0; order];
        // φ^(2m) = 2 C_{m-1} (1/2)^{2m}
        let mut catalan = 1.0f64;
        for m in 1..=order / 2 {
            out[2 * m - 1] = 2.0 * catalan * 0.25f64.powi(m as i32);
            catalan = catalan * 2.0 * (2.0 * m as f64 - 1.0) / (m as f64 + 1.0);
        }
        out
    }

    fn tree_phi_closed(d: f64, k: f64, l: f64) -> f64 {
        d * (1.0 - (1.0 - 4.0 * (d - 1.0) * l * l).max(0.0).sqrt()) / (2.0 * (d - 1.0)) + k * l
    }

    #[test]
    fn z_coefficients_match_catalan() {
        let z = RateKernel::line(LineDomain::Z, Profile::constant(1.0)).unwrap();
        let s = first_return_coeffs(&z, &Vertex::Line(0), 40).unwrap();
        let oracle = z_first_return_oracle(40);
        for (a, b) in s.coefficients().iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-15 * b.max(1e-300), "{a} vs {b}");
        }
    }

    #[test]
    fn routes_agree() {
        let k = RateKernel::tree(3, 0.4).unwrap();
        let a = first_return_coeffs_with(&k, &Vertex::tree_root(), 10, Route::Auto).unwrap();
        let b = first_return_coeffs_with(&k, &Vertex::tree_root(), 10, Route::Vertex).unwrap();
        assert!(a.is_certified() && !b.is_certified());
        for (x, y) in a.coefficients().iter().zip(b.coefficients()) {
            assert!((x - y).abs() <= 1e-12 * x.max(1.0));
        }
    }

    #[test]
    fn tree_phi_matches_closed_form() {
        for &(d, k) in &[(3u32, 0.0), (3, 1.5), (4, 0.3), (5, 6.0)] {
            let kernel = RateKernel::tree(d, k).unwrap();
            let s = first_return_coeffs(&kernel, &Vertex::tree_root(), 64).unwrap();
            let r = 1.0 / (2.0 * f64::from(d - 1).sqrt());
            for frac in [0.1, 0.5, 0.9, 0.999, 1.0] {
                let l = r * frac;
                let v = phi_eval(&s, l).unwrap();
                let exact = tree_phi_closed(f64::from(d), k, l);
                assert!(v.lower <= exact + 1e-12 && exact <= v.upper().unwrap() + 1e-12, "{d} {k} {frac} {v:?} {exact}");
                assert!(v.upper().unwrap() - v.lower < 1e-9, "{d} {k} {frac}");
            }
            assert_eq!(phi_eval(&s, r * 1.01).unwrap().tail, Tail::Divergent);
        }
    }

    #[test]
    fn partial_sums_approach_three_quarters_from_below() {
        let k = RateKernel::tree(3, 0.0).unwrap();
        let l = 1.0 / (2.0 * 2f64.sqrt());
        let v64 = phi_eval(&first_return_coeffs(&k, &Vertex::tree_root(), 64).unwrap(), l).unwrap();
        let v512 = phi_eval(&first_return_coeffs(&k, &Vertex::tree_root(), 512).unwrap(), l).unwrap();
        assert!(v64.value < v512.value && v512.value < 0.75);
        // square-root branch point: rounding of λ shows up at the 1e-8 level
        assert!((v512.upper().unwrap() - 0.75).abs() < 1e-7, "{v512:?}");
    }

    #[test]
    fn crude_tail_for_non_lumpable_kernels() {
        let k = RateKernel::tree(3, 0.0).unwrap();
        let p = Patch::new().with_row(Vertex::tree(&[0]), vec![(Vertex::tree_root(), 1.0), (Vertex::tree(&[0]), 0.5)]);
        let k = k.apply_patch(&p).unwrap();
        let s = first_return_coeffs(&k, &Vertex::tree_root(), 8).unwrap();
        assert!(!s.is_certified());
        let v = phi_eval(&s, 0.1).unwrap();
        let Tail::Bounded(t) = v.tail else { panic!() };
        let step: f64 = 3.0 * 0.1;
        assert!((t - step.powi(9) / (1.0 - step)).abs() < 1e-12 * t);
        assert_eq!(phi_eval(&s, 0.4).unwrap().tail, Tail::Divergent);
    }

    #[test]
    fn lambda_s_on_z_and_tree() {
        let z = RateKernel::line(LineDomain::Z, Profile::constant(1.0)).unwrap();
        let i = lambda_s_phi(&z, &Vertex::Line(0), 64, 1e-9).unwrap();
        assert!(i.contains(1.0, 1e-9));
        let t = RateKernel::tree(3, 0.0).unwrap();
        let i = lambda_s_phi(&t, &Vertex::tree_root(), 64, 1e-10).unwrap();
        assert!(i.contains(1.0 / (2.0 * 2f64.sqrt()), 1e-10));
        let t = RateKernel::tree(3, 1.5).unwrap();
        let i = lambda_s_phi(&t, &Vertex::tree_root(), 64, 1e-10).unwrap();
        assert!(i.contains(1.0 / 3.0, 1e-10));
    }

    #[test]
    fn lambda_s_without_returns_is_an_error() {
        let n = RateKernel::line(LineDomain::N, Profile::constant(0.0)).unwrap();
        assert_eq!(
            lambda_s_phi(&n, &Vertex::Line(0), 16, 1e-6),
            Err(GenFunError::NoReturnPaths(16))
        );
    }

    #[test]
    fn diagonal_powers() {
        let k = FiniteKernel::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let terms = matrix_power_diagonal(&k, 0, 4);
        let values: Vec<f64> = terms.iter().map(|t| t.value).collect();
        assert_eq!(values, vec![0.0, 1.0, 0.0, 1.0]);
        assert!(terms[0].estimate.is_infinite());
        assert!((terms[3].estimate - 1.0).abs() < 1e-15);
        let loop2 = FiniteKernel::from_dense(&[vec![2.0]]).unwrap();
        let t = matrix_power_diagonal(&loop2, 0, 300);
        assert!((t[299].value.ln() - 300.0 * 2f64.ln()).abs() < 1e-9);
        assert!((t[299].estimate - 0.5).abs() < 1e-12);
    }

    #[test]
    fn first_return_finite_single_loop() {
        let k = FiniteKernel::from_dense(&[vec![0.5]]).unwrap();
        assert_eq!(first_return_finite(&k, 0, 3), vec![0.5, 0.0, 0.0]);
    }
}
