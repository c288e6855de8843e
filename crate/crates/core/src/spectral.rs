//! Spectral radii of finite truncations and the truncation schedule for `λ_s`.
//!
//! On a finite irreducible truncation `λ_s = 1/ρ(K_ball)`, and these values
//! decrease to the `λ_s` of the full kernel as the ball grows.

use thiserror::Error;

use crate::genfun::Route;
use crate::kernels::{truncate, FiniteKernel, KernelError, RateKernel, Vertex};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("power iteration did not converge in {iterations} steps; last bracket [{lower}, {upper}]")]
    NonConvergence { lower: f64, upper: f64, iterations: usize },
    #[error("radii must be strictly increasing")]
    RadiiNotIncreasing,
    #[error("tolerance must be finite and positive, got {0}")]
    InvalidTolerance(f64),
    #[error("spectral radius decreased from {previous} to {current} at radius {radius}")]
    ScheduleViolation { radius: usize, previous: f64, current: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectralMethod {
    PowerIteration,
    /// Sturm-sequence bisection on a tridiagonal matrix.
    Sturm,
}

impl SpectralMethod {
    pub fn name(&self) -> &'static str {
        match self {
            SpectralMethod::PowerIteration => "power_iteration",
            SpectralMethod::Sturm => "sturm",
        }
    }
}

/// Spectral radius with a certified bracket `lower <= ρ <= upper`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralEstimate {
    pub radius: f64,
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    pub method: SpectralMethod,
}

pub const DEFAULT_MAX_ITERS: usize = 1_000_000;

/// Shifted power iteration from the all-ones vector.
///
/// The shift `0.1 * max row sum` breaks the `±ρ` tie of bipartite kernels.
/// For `x > 0` the Collatz–Wielandt ratios `(Kx)_i / x_i` bracket `ρ`; for
/// symmetric kernels the Rayleigh quotient tightens the lower end. Iteration
/// stops once the bracket is within `tol` relative width.
pub fn spectral_radius(kernel: &FiniteKernel, tol: f64, max_iters: usize) -> Result<SpectralEstimate, SpectralError> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(SpectralError::InvalidTolerance(tol));
    }
    let n = kernel.len();
    if n == 0 || kernel.is_zero() {
        return Ok(SpectralEstimate {
            radius: 0.0,
            lower: 0.0,
            upper: 0.0,
            iterations: 0,
            method: SpectralMethod::PowerIteration,
        });
    }
    let shift = 0.1 * kernel.max_row_sum();
    let symmetric = kernel.is_symmetric();
    let mut x = vec![1.0; n];
    let mut y = vec![0.0; n];
    let (mut lower, mut upper) = (0.0f64, f64::INFINITY);
    for it in 1..=max_iters {
        kernel.mul_vec(&x, &mut y);
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        let (mut xy, mut xx) = (0.0, 0.0);
        for i in 0..n {
            y[i] += shift * x[i];
            let r = y[i] / x[i];
            lo = lo.min(r);
            hi = hi.max(r);
            xy += x[i] * y[i];
            xx += x[i] * x[i];
        }
        if symmetric {
            lo = lo.max(xy / xx);
        }
        lower = lower.max(lo - shift);
        upper = upper.min(hi - shift);
        if upper - lower <= tol * upper {
            return Ok(SpectralEstimate {
                radius: 0.5 * (lower + upper),
                lower,
                upper,
                iterations: it,
                method: SpectralMethod::PowerIteration,
            });
        }
        let top = y.iter().copied().fold(0.0, f64::max);
        for i in 0..n {
            // keep x strictly positive so the ratios stay defined
            x[i] = (y[i] / top).max(f64::MIN_POSITIVE);
        }
    }
    Err(SpectralError::NonConvergence { lower, upper, iterations: max_iters })
}

/// Number of eigenvalues below `x` of the symmetric tridiagonal matrix with
/// diagonal `d` and squared off-diagonal `e2`.
fn sturm_count(d: &[f64], e2: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..d.len() {
        let coupling = if i == 0 { 0.0 } else { e2[i - 1] / q };
        q = d[i] - x - coupling;
        if q == 0.0 {
            q = -f64::EPSILON * (x.abs() + 1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Largest eigenvalue, equal to the spectral radius, of a nonnegative
/// tridiagonal matrix (`upper[i] = a_{i,i+1}`, `lower[i] = a_{i+1,i}`).
pub fn tridiagonal_spectral_radius(diag: &[f64], upper: &[f64], lower: &[f64]) -> SpectralEstimate {
    let n = diag.len();
    let e2: Vec<f64> = upper.iter().zip(lower).map(|(u, l)| u * l).collect();
    let e: Vec<f64> = e2.iter().map(|v| v.sqrt()).collect();
    let mut hi = 0.0f64;
    for i in 0..n {
        let left = if i > 0 { e[i - 1] } else { 0.0 };
        let right = if i + 1 < n { e[i] } else { 0.0 };
        hi = hi.max(diag[i] + left + right);
    }
    let mut lo = diag.iter().copied().fold(0.0, f64::max);
    let mut iterations = 0;
    while hi - lo > 4.0 * f64::EPSILON * hi.max(f64::MIN_POSITIVE) && iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(diag, &e2, mid) == n {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }
    SpectralEstimate {
        radius: 0.5 * (lo + hi),
        lower: lo,
        upper: hi,
        iterations,
        method: SpectralMethod::Sturm,
    }
}

/// Spectral radius of a finite kernel, through the Sturm path when its
/// index order is tridiagonal.
pub fn spectral_radius_auto(kernel: &FiniteKernel, tol: f64, max_iters: usize) -> Result<SpectralEstimate, SpectralError> {
    match kernel.tridiagonal() {
        Some((d, u, l)) => Ok(tridiagonal_spectral_radius(&d, &u, &l)),
        None => spectral_radius(kernel, tol, max_iters),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleEntry {
    pub radius: usize,
    pub vertex_count: u128,
    pub spectral_radius: f64,
    pub lambda_s_estimate: f64,
    pub method: SpectralMethod,
}

/// Truncation estimates `1/ρ(K_ball(r))` along increasing radii.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralSchedule {
    pub center: Vertex,
    pub entries: Vec<ScheduleEntry>,
}

impl SpectralSchedule {
    pub fn final_estimate(&self) -> Option<f64> {
        self.entries.last().map(|e| e.lambda_s_estimate)
    }

    /// Change of the estimate between the last two radii.
    pub fn last_gap(&self) -> Option<f64> {
        let n = self.entries.len();
        (n >= 2).then(|| self.entries[n - 2].lambda_s_estimate - self.entries[n - 1].lambda_s_estimate)
    }

    /// Limit of the estimates from the last three radii under the model
    /// `λ(R) = λ_∞ + a/(R+b)^2`, which matches the boundary effect of a
    /// ball truncation. `None` when the last three estimates are not
    /// strictly decreasing with convex differences.
    pub fn extrapolated_limit(&self) -> Option<f64> {
        let n = self.entries.len();
        if n < 3 {
            return None;
        }
        let e = &self.entries[n - 3..];
        let (r1, r2, r3) = (e[0].radius as f64, e[1].radius as f64, e[2].radius as f64);
        let (y1, y2, y3) = (e[0].lambda_s_estimate, e[1].lambda_s_estimate, e[2].lambda_s_estimate);
        if !(y1 > y2 && y2 > y3) {
            return None;
        }
        let observed = (y1 - y2) / (y2 - y3);
        let u = |r: f64, b: f64| 1.0 / ((r + b) * (r + b));
        let ratio = |b: f64| (u(r1, b) - u(r2, b)) / (u(r2, b) - u(r3, b));
        if observed <= (r2 - r1) / (r3 - r2) {
            return None;
        }
        // ratio(b) falls from +inf at b = -r1 to the linear limit as b grows
        let mut lo = -r1 + 1e-12 * r1.max(1.0);
        let mut hi = 1.0f64;
        while ratio(hi) > observed {
            hi *= 2.0;
            if hi > 1e12 {
                return None;
            }
        }
        if ratio(lo) < observed {
            return Some(y3);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ratio(mid) > observed {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let b = 0.5 * (lo + hi);
        let a = (y2 - y3) / (u(r2, b) - u(r3, b));
        Some(y3 - a * u(r3, b))
    }
}

pub fn lambda_s_truncation(
    kernel: &RateKernel,
    center: &Vertex,
    radii: &[usize],
    tol: f64,
) -> Result<SpectralSchedule, SpectralError> {
    lambda_s_truncation_with(kernel, center, radii, tol, Route::Auto)
}

pub fn lambda_s_truncation_with(
    kernel: &RateKernel,
    center: &Vertex,
    radii: &[usize],
    tol: f64,
    route: Route,
) -> Result<SpectralSchedule, SpectralError> {
    if radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SpectralError::RadiiNotIncreasing);
    }
    let quotient = match route {
        Route::Auto if *center == kernel.origin() => kernel.radial_quotient(),
        _ => None,
    };
    let mut entries: Vec<ScheduleEntry> = Vec::with_capacity(radii.len());
    for &radius in radii {
        let (estimate, vertex_count) = match &quotient {
            Some(q) => {
                let ball = q.truncate(radius)?;
                (spectral_radius_auto(&ball, tol, DEFAULT_MAX_ITERS)?, q.ball_size(&ball))
            }
            None => {
                let ball = truncate(kernel, center, radius)?;
                (spectral_radius(&ball, tol, DEFAULT_MAX_ITERS)?, ball.len() as u128)
            }
        };
        let rho = estimate.radius;
        if let Some(prev) = entries.last() {
            let slack = tol * rho.max(prev.spectral_radius) + 1e-14;
            if rho + slack < prev.spectral_radius {
                return Err(SpectralError::ScheduleViolation {
                    radius,
                    previous: prev.spectral_radius,
                    current: rho,
                });
            }
        }
        entries.push(ScheduleEntry {
            radius,
            vertex_count,
            spectral_radius: rho,
            lambda_s_estimate: if rho > 0.0 { 1.0 / rho } else { f64::INFINITY },
            method: estimate.method,
        });
    }
    Ok(SpectralSchedule { center: center.clone(), entries })
}

/// Radii `2, 4, 8, ...` while the ball stays within `vertex_cap` vertices
/// and keeps growing.
pub fn doubling_radii(kernel: &RateKernel, center: &Vertex, vertex_cap: usize) -> Vec<usize> {
    let quotient = (*center == kernel.origin()).then(|| kernel.radial_quotient()).flatten();
    let ball_size = |r: usize| match &quotient {
        Some(q) => q.truncate(r).map(|b| q.ball_size(&b)).unwrap_or(u128::MAX),
        None => truncate(kernel, center, r).map(|b| b.len() as u128).unwrap_or(u128::MAX),
    };
    let mut radii = Vec::new();
    let mut previous = None;
    let mut r = 2usize;
    while r <= 1 << 24 {
        let size = ball_size(r);
        if size > vertex_cap as u128 || previous == Some(size) {
            break;
        }
        radii.push(r);
        previous = Some(size);
        r *= 2;
    }
    radii
}
