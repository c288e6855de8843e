//! Branching random walks in continuous time: critical parameters, extinction
//! probabilities and the phase structure of kernels that differ on a finite set.

pub mod genfun;
mod interval;
pub mod kernels;
pub mod montecarlo;
pub mod oracle;
pub mod phases;
pub mod report;
pub mod spectral;

pub use interval::Interval;

use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("lambda must be finite and nonnegative, got {0}")]
pub struct InvalidLambda(pub f64);

/// A kernel together with the birth-rate multiplier `λ`.
///
/// `λ = 0` is accepted as the degenerate walk without births.
#[derive(Clone, Debug)]
pub struct Brw<K> {
    pub kernel: K,
    pub lambda: f64,
}

impl<K> Brw<K> {
    pub fn new(kernel: K, lambda: f64) -> Result<Self, InvalidLambda> {
        if lambda.is_finite() && lambda >= 0.0 {
            Ok(Self { kernel, lambda })
        } else {
            Err(InvalidLambda(lambda))
        }
    }
}
