//! Exact extinction probabilities on finite kernels by fixed-point iteration
//! of the offspring generating function of the discrete-time counterpart,
//! `G_x(s) = 1 / (1 + λ Σ_y k_xy (1 - s_y))`.

use thiserror::Error;

use crate::kernels::{check_assumption, FiniteKernel, Vertex};
use crate::Brw;

/// Iteration stops once `max_x |q_x - G_x(q)|` is at most this.
pub const RESIDUAL_TOL: f64 = 1e-12;
pub const ITERATION_CAP: usize = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("vector has {got} entries for a kernel on {expected} vertices")]
    Dimension { expected: usize, got: usize },
    #[error("vertex index {0} is out of range")]
    IndexOutOfRange(usize),
    #[error("vertex {0} is not in the kernel")]
    UnknownVertex(Vertex),
    #[error("local extinction needs an irreducible kernel")]
    Reducible,
    #[error("vectors are indexed by different vertex sets")]
    VertexSetMismatch,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExtinctionKind {
    /// `q(x, X)`: eventual extinction.
    Global,
    /// `q(x, A)`: visits to `A` stop eventually.
    Local(Vec<usize>),
    /// Probability that `A` is never visited.
    Avoid(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtinctionVector {
    pub vertices: Vec<Vertex>,
    pub values: Vec<f64>,
    pub kind: ExtinctionKind,
    pub iterations: usize,
    pub residual: f64,
    /// `false` when the iteration cap was hit before the residual bound,
    /// which happens near criticality; `values` is then the last iterate.
    pub converged: bool,
}

impl ExtinctionVector {
    pub fn value_at(&self, v: &Vertex) -> Option<f64> {
        self.vertices.iter().position(|u| u == v).map(|i| self.values[i])
    }
}

pub fn offspring_pgf(brw: &Brw<FiniteKernel>, s: &[f64]) -> Result<Vec<f64>, OracleError> {
    let k = &brw.kernel;
    if s.len() != k.len() {
        return Err(OracleError::Dimension { expected: k.len(), got: s.len() });
    }
    Ok((0..k.len()).map(|x| pgf_at(brw, x, s)).collect())
}

fn pgf_at(brw: &Brw<FiniteKernel>, x: usize, s: &[f64]) -> f64 {
    let deficit: f64 = brw.kernel.row(x).iter().map(|&(y, r)| r * (1.0 - s[y])).sum();
    1.0 / (1.0 + brw.lambda * deficit)
}

/// Minimal fixed point of `s -> G(s)` restricted to the free coordinates,
/// with the coordinates in `pinned` held at zero.
fn minimal_fixed_point(brw: &Brw<FiniteKernel>, pinned: &[bool]) -> (Vec<f64>, usize, f64, bool) {
    let n = brw.kernel.len();
    let mut q = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for it in 1..=ITERATION_CAP {
        residual = 0.0;
        for x in 0..n {
            next[x] = if pinned[x] { 0.0 } else { pgf_at(brw, x, &q) };
            residual = residual.max((next[x] - q[x]).abs());
        }
        std::mem::swap(&mut q, &mut next);
        if residual <= RESIDUAL_TOL {
            return (q, it, residual, true);
        }
    }
    (q, ITERATION_CAP, residual, false)
}

fn checked_indices(brw: &Brw<FiniteKernel>, set: &[usize]) -> Result<Vec<usize>, OracleError> {
    let mut out = set.to_vec();
    out.sort_unstable();
    out.dedup();
    match out.iter().find(|&&i| i >= brw.kernel.len()) {
        Some(&i) => Err(OracleError::IndexOutOfRange(i)),
        None => Ok(out),
    }
}

/// Indices of the given vertices.
pub fn indices_of(kernel: &FiniteKernel, vertices: &[Vertex]) -> Result<Vec<usize>, OracleError> {
    vertices
        .iter()
        .map(|v| kernel.index_of(v).ok_or_else(|| OracleError::UnknownVertex(v.clone())))
        .collect()
}

pub fn extinction_global(brw: &Brw<FiniteKernel>) -> ExtinctionVector {
    let pinned = vec![false; brw.kernel.len()];
    let (values, iterations, residual, converged) = minimal_fixed_point(brw, &pinned);
    ExtinctionVector {
        vertices: brw.kernel.vertices().to_vec(),
        values,
        kind: ExtinctionKind::Global,
        iterations,
        residual,
        converged,
    }
}

/// Probability of never visiting `a` (zero on `a` itself).
pub fn extinction_avoid(brw: &Brw<FiniteKernel>, a: &[usize]) -> Result<ExtinctionVector, OracleError> {
    let a = checked_indices(brw, a)?;
    let mut pinned = vec![false; brw.kernel.len()];
    for &i in &a {
        pinned[i] = true;
    }
    let (values, iterations, residual, converged) = minimal_fixed_point(brw, &pinned);
    Ok(ExtinctionVector {
        vertices: brw.kernel.vertices().to_vec(),
        values,
        kind: ExtinctionKind::Avoid(a),
        iterations,
        residual,
        converged,
    })
}

/// `q(x, A)` on an irreducible finite kernel. There every nonempty `A` is
/// visited infinitely often exactly on global survival, so the vector is
/// the global one; `A = ∅` gives the constant 1.
pub fn extinction_local(brw: &Brw<FiniteKernel>, a: &[usize]) -> Result<ExtinctionVector, OracleError> {
    let a = checked_indices(brw, a)?;
    if !check_assumption(&brw.kernel).is_irreducible() {
        return Err(OracleError::Reducible);
    }
    let mut v = if a.is_empty() {
        ExtinctionVector {
            vertices: brw.kernel.vertices().to_vec(),
            values: vec![1.0; brw.kernel.len()],
            kind: ExtinctionKind::Global,
            iterations: 0,
            residual: 0.0,
            converged: true,
        }
    } else {
        extinction_global(brw)
    };
    v.kind = ExtinctionKind::Local(a);
    Ok(v)
}

/// Componentwise comparison of two vectors on the same vertex set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Comparison {
    pub max_abs_difference: f64,
    /// Equal within the tolerance.
    pub equal: bool,
    /// `v1 <= v2` componentwise within the tolerance.
    pub le: bool,
    /// `v1 >= v2` componentwise within the tolerance.
    pub ge: bool,
}

pub fn compare_vectors(v1: &ExtinctionVector, v2: &ExtinctionVector, tol: f64) -> Result<Comparison, OracleError> {
    if v1.vertices != v2.vertices {
        return Err(OracleError::VertexSetMismatch);
    }
    let mut max_abs_difference = 0.0f64;
    let (mut le, mut ge) = (true, true);
    for (a, b) in v1.values.iter().zip(&v2.values) {
        max_abs_difference = max_abs_difference.max((a - b).abs());
        le &= *a <= b + tol;
        ge &= *a + tol >= *b;
    }
    Ok(Comparison {
        max_abs_difference,
        equal: max_abs_difference <= tol,
        le,
        ge,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brw(m: &[Vec<f64>], lambda: f64) -> Brw<FiniteKernel> {
        Brw::new(FiniteKernel::from_dense(m).unwrap(), lambda).unwrap()
    }

    #[test]
    fn pgf_values() {
        let b = brw(&[vec![1.0]], 1.0);
        assert_eq!(offspring_pgf(&b, &[0.0]).unwrap(), vec![0.5]);
        assert_eq!(offspring_pgf(&b, &[1.0]).unwrap(), vec![1.0]);
        assert!(offspring_pgf(&b, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn single_loop_closed_forms() {
        // q = 1/(1 + m(1-q)) has roots 1 and 1/m
        let sub = extinction_global(&brw(&[vec![1.0]], 0.5));
        assert!((sub.values[0] - 1.0).abs() < 1e-10);
        let sup = extinction_global(&brw(&[vec![1.0]], 2.0));
        assert!(sup.converged);
        assert!((sup.values[0] - 0.5).abs() < 1e-11);
    }

    #[test]
    fn chain_avoidance() {
        // a -> b only; never hitting b means no children at all
        let b = brw(&[vec![0.0, 1.0], vec![0.0, 0.0]], 2.0);
        let v = extinction_avoid(&b, &[1]).unwrap();
        assert!((v.values[0] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(v.values[1], 0.0);
        assert_eq!(extinction_global(&b).values, vec![1.0, 1.0]);
    }

    #[test]
    fn local_requires_irreducibility() {
        let b = brw(&[vec![0.0, 1.0], vec![0.0, 0.0]], 2.0);
        assert_eq!(extinction_local(&b, &[0]), Err(OracleError::Reducible));
        let b = brw(&[vec![0.0, 1.0], vec![1.0, 0.0]], 2.0);
        let local = extinction_local(&b, &[1]).unwrap();
        let global = extinction_global(&b);
        assert!(compare_vectors(&local, &global, 1e-15).unwrap().equal);
        let empty = extinction_local(&b, &[]).unwrap();
        assert_eq!(empty.values, vec![1.0, 1.0]);
    }

    #[test]
    fn critical_fixture_flags_slow_convergence_by_residual_only() {
        let v = extinction_global(&brw(&[vec![1.0]], 1.0));
        assert!(v.converged);
        assert!(v.values[0] > 0.999 && v.values[0] <= 1.0);
    }

    #[test]
    fn compare_rejects_mismatched_supports() {
        let a = extinction_global(&brw(&[vec![1.0]], 2.0));
        let b = extinction_global(&brw(&[vec![0.0, 1.0], vec![1.0, 0.0]], 2.0));
        assert_eq!(compare_vectors(&a, &b, 1e-9), Err(OracleError::VertexSetMismatch));
    }

    fn random_kernel() -> impl Strategy<Value = (Vec<Vec<f64>>, f64)> {
        (2usize..6).prop_flat_map(|n| {
            (
                proptest::collection::vec(proptest::collection::vec(prop_oneof![Just(0.0), 0.0..2.0f64], n), n),
                0.05..3.0f64,
            )
        })
    }

    proptest! {
        #[test]
        fn extinction_is_a_fixed_point_in_unit_cube((m, lambda) in random_kernel()) {
            let b = brw(&m, lambda);
            let q = extinction_global(&b);
            prop_assert!(q.converged);
            let g = offspring_pgf(&b, &q.values).unwrap();
            for (x, y) in q.values.iter().zip(&g) {
                prop_assert!((0.0..=1.0).contains(x));
                prop_assert!((x - y).abs() <= RESIDUAL_TOL * 10.0);
            }
        }

        #[test]
        fn avoidance_shrinks_as_the_target_grows((m, lambda) in random_kernel(), p in 0usize..6, r in 0usize..6) {
            let b = brw(&m, lambda);
            let one = extinction_avoid(&b, &[p % m.len()]).unwrap();
            let two = extinction_avoid(&b, &[p % m.len(), r % m.len()]).unwrap();
            prop_assert_eq!(one.values[p % m.len()], 0.0);
            prop_assert!(compare_vectors(&two, &one, 1e-11).unwrap().le);
        }
    }
}
