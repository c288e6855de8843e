//! Rate kernels on countable spaces: regular trees and the integer lines.
//!
//! A [`RateKernel`] is a lazily evaluated family kernel with an optional
//! finite [`Patch`] overlay. Rows are always normalized: sorted by target,
//! zero rates dropped.

mod finite;
mod profile;
mod quotient;
mod spec;
mod vertex;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

pub use finite::{
    check_assumption, truncate, truncate_with_cap, AssumptionReport, FiniteKernel,
    DEFAULT_VERTEX_CAP,
};
pub use profile::Profile;
pub use quotient::{BirthDeathChain, ChainTail, Quotient};
pub use spec::{FamilyTag, KernelSpec, PatchRowSpec};
pub use vertex::{TreeAddr, Vertex};

pub type Row = Vec<(Vertex, f64)>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("tree degree must be at least 3, got {0}")]
    InvalidDegree(u32),
    #[error("rate must be finite and nonnegative, got {0}")]
    InvalidRate(f64),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("vertex {0} does not belong to the {1} space")]
    InvalidVertex(String, &'static str),
    #[error("row of {0} lists target {1} more than once")]
    DuplicateTarget(String, String),
    #[error("truncation reached {reached} vertices, above the cap of {cap}")]
    Oversize { cap: usize, reached: usize },
    #[error("kernel spec: {0}")]
    Spec(String),
    #[error("vertex {vertex} has {len} rates for a space of {n} vertices")]
    RowShape { vertex: usize, len: usize, n: usize },
}

/// Which line a line kernel lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LineDomain {
    Z,
    N,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    /// Regular tree of degree `d`, unit rates between neighbours, optional loop at the origin.
    Tree { d: u32, loop_rate: f64 },
    /// Nearest-neighbour kernel with rates `k_{|x|}/2`.
    Line { domain: LineDomain, profile: Profile },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Tree { .. } => "tree",
            Family::Line { domain: LineDomain::Z, .. } => "line_z",
            Family::Line { domain: LineDomain::N, .. } => "line_n",
        }
    }
}

/// Finite set of replacement rows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Patch {
    rows: BTreeMap<Vertex, Row>,
}

impl Patch {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_row(mut self, vertex: Vertex, row: Row) -> Self {
        self.rows.insert(vertex, row);
        self
    }

    pub fn insert(&mut self, vertex: Vertex, row: Row) {
        self.rows.insert(vertex, row);
    }

    pub fn support(&self) -> impl Iterator<Item = &Vertex> {
        self.rows.keys()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&Vertex, &Row)> {
        self.rows.iter()
    }
}

/// A rate kernel `K = (k_xy)` on a countable space.
#[derive(Clone, Debug, PartialEq)]
pub struct RateKernel {
    family: Family,
    patch: Arc<BTreeMap<Vertex, Row>>,
}

fn check_rate(rate: f64) -> Result<(), KernelError> {
    if rate.is_finite() && rate >= 0.0 {
        Ok(())
    } else {
        Err(KernelError::InvalidRate(rate))
    }
}

fn normalize(mut row: Row) -> Row {
    row.retain(|(_, r)| *r > 0.0);
    row.sort_by(|a, b| a.0.cmp(&b.0));
    row
}

impl RateKernel {
    /// Nearest-neighbour kernel on the regular tree `T_d` with rate 1 on every
    /// edge and rate `loop_rate` from the origin to itself.
    pub fn tree(d: u32, loop_rate: f64) -> Result<Self, KernelError> {
        if d < 3 || d > u32::from(u16::MAX) {
            return Err(KernelError::InvalidDegree(d));
        }
        check_rate(loop_rate)?;
        Ok(Self {
            family: Family::Tree { d, loop_rate },
            patch: Arc::default(),
        })
    }

    /// Nearest-neighbour kernel with `k_{x,x±1} = k_{|x|}/2` on ℤ, or its
    /// restriction to ℕ.
    pub fn line(domain: LineDomain, profile: Profile) -> Result<Self, KernelError> {
        profile.validate()?;
        Ok(Self {
            family: Family::Line { domain, profile },
            patch: Arc::default(),
        })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn origin(&self) -> Vertex {
        match self.family {
            Family::Tree { .. } => Vertex::tree_root(),
            Family::Line { .. } => Vertex::Line(0),
        }
    }

    pub fn contains(&self, v: &Vertex) -> bool {
        match (&self.family, v) {
            (Family::Tree { d, .. }, Vertex::Tree(addr)) => addr.is_valid(*d),
            (Family::Line { domain: LineDomain::Z, .. }, Vertex::Line(_)) => true,
            (Family::Line { domain: LineDomain::N, .. }, Vertex::Line(x)) => *x >= 0,
            _ => false,
        }
    }

    fn require(&self, v: &Vertex) -> Result<(), KernelError> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(KernelError::InvalidVertex(v.to_string(), self.family.name()))
        }
    }

    /// Row of the unpatched family kernel.
    pub fn family_row(&self, v: &Vertex) -> Row {
        if !self.contains(v) {
            return Row::new();
        }
        let mut row = Row::new();
        match (&self.family, v) {
            (Family::Tree { d, loop_rate }, Vertex::Tree(addr)) => {
                let fan = if addr.is_root() { *d } else { *d - 1 };
                if let Some(parent) = addr.parent() {
                    row.push((Vertex::Tree(parent), 1.0));
                }
                row.extend((0..fan as u16).map(|i| (Vertex::Tree(addr.child(i)), 1.0)));
                if addr.is_root() {
                    row.push((v.clone(), *loop_rate));
                }
            }
            (Family::Line { domain, profile }, Vertex::Line(x)) => {
                let half = profile.value(x.unsigned_abs()) / 2.0;
                if *domain == LineDomain::Z || *x > 0 {
                    row.push((Vertex::Line(x - 1), half));
                }
                row.push((Vertex::Line(x + 1), half));
            }
            _ => unreachable!("contains() checked the vertex type"),
        }
        normalize(row)
    }

    /// Row `(y, k_xy)` for all `y` with `k_xy > 0`, sorted by `y`.
    /// Vertices outside the space have an empty row.
    pub fn row(&self, v: &Vertex) -> Row {
        match self.patch.get(v) {
            Some(row) => row.clone(),
            None => self.family_row(v),
        }
    }

    pub fn rate(&self, x: &Vertex, y: &Vertex) -> f64 {
        self.row(x)
            .iter()
            .find(|(t, _)| t == y)
            .map_or(0.0, |(_, r)| *r)
    }

    pub fn patch_support(&self) -> impl Iterator<Item = &Vertex> {
        self.patch.keys()
    }

    pub fn is_patched(&self) -> bool {
        !self.patch.is_empty()
    }

    /// `sup_x sum_y k_xy`.
    pub fn row_sum_bound(&self) -> f64 {
        let family = match &self.family {
            Family::Tree { d, loop_rate } => f64::from(*d) + loop_rate,
            Family::Line { profile, .. } => profile.sup_from(0),
        };
        self.patch
            .values()
            .map(|row| row.iter().map(|(_, r)| r).sum::<f64>())
            .fold(family, f64::max)
    }

    /// `limsup` of the row sums along the family, ignoring finitely many rows.
    pub fn limsup_row_sum(&self) -> f64 {
        match &self.family {
            Family::Tree { d, .. } => f64::from(*d),
            Family::Line { profile, .. } => profile.limsup(),
        }
    }

    /// New kernel with the rows of `patch` replacing the current rows.
    /// `self` is left untouched.
    pub fn apply_patch(&self, patch: &Patch) -> Result<Self, KernelError> {
        let mut rows = (*self.patch).clone();
        for (v, row) in &patch.rows {
            self.require(v)?;
            let mut seen = BTreeSet::new();
            for (t, r) in row {
                self.require(t)?;
                check_rate(*r)?;
                if !seen.insert(t) {
                    return Err(KernelError::DuplicateTarget(v.to_string(), t.to_string()));
                }
            }
            rows.insert(v.clone(), normalize(row.clone()));
        }
        Ok(Self {
            family: self.family.clone(),
            patch: Arc::new(rows),
        })
    }

    /// Whether the two kernels share a family, so that their difference is
    /// confined to the union of their patch supports and the origin.
    pub fn same_family_class(&self, other: &Self) -> bool {
        match (&self.family, &other.family) {
            (Family::Tree { d: a, .. }, Family::Tree { d: b, .. }) => a == b,
            (
                Family::Line { domain: a, profile: p },
                Family::Line { domain: b, profile: q },
            ) => a == b && p == q,
            _ => false,
        }
    }

    /// Vertices where the two kernels may differ, or `None` when the
    /// families differ on infinitely many vertices.
    pub fn difference_candidates(&self, other: &Self) -> Option<BTreeSet<Vertex>> {
        if !self.same_family_class(other) {
            return None;
        }
        let mut set: BTreeSet<Vertex> = self.patch_support().cloned().collect();
        set.extend(other.patch_support().cloned());
        set.insert(self.origin());
        Some(set)
    }
}

/// The set of probe vertices whose rows differ between the two kernels.
/// Rates are compared exactly.
pub fn delta_set<'a>(
    k1: &RateKernel,
    k2: &RateKernel,
    probe: impl IntoIterator<Item = &'a Vertex>,
) -> BTreeSet<Vertex> {
    probe
        .into_iter()
        .filter(|v| {
            let (a, b) = (k1.row(v), k2.row(v));
            a.len() != b.len()
                || a
                    .iter()
                    .zip(&b)
                    .any(|((x, r), (y, s))| x != y || r.to_bits() != s.to_bits())
        })
        .cloned()
        .collect()
}
