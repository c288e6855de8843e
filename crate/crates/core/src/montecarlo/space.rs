use std::borrow::Cow;
use std::collections::BTreeSet;
use std::fmt::Debug;

use crate::kernels::{FiniteKernel, Quotient, RateKernel, Vertex};

/// A state space the simulator can run on.
pub trait Space: Sync {
    type Site: Clone + Ord + Send + Sync + Debug;

    /// Outgoing rates of `site`, positive entries only.
    fn row(&self, site: &Self::Site) -> Cow<'_, [(Self::Site, f64)]>;

    /// `sup` of the row sums.
    fn row_sum_bound(&self) -> f64;

    /// Target set, with a ranking used to decide which particles to keep
    /// when the population is cut back to the cap (smaller ranks first).
    fn target(&self, sites: Vec<Self::Site>) -> Target<'_, Self::Site>;
}

/// A set of sites plus a distance-like ranking towards it.
pub struct Target<'a, T> {
    sites: BTreeSet<T>,
    rank: Box<dyn Fn(&T) -> u64 + Sync + 'a>,
}

impl<'a, T: Ord> Target<'a, T> {
    pub fn new(sites: impl IntoIterator<Item = T>, rank: impl Fn(&T) -> u64 + Sync + 'a) -> Self {
        Self {
            sites: sites.into_iter().collect(),
            rank: Box::new(rank),
        }
    }

    /// Constant ranking.
    pub fn unranked(sites: impl IntoIterator<Item = T>) -> Self {
        Self::new(sites, |_| 0)
    }

    pub fn contains(&self, site: &T) -> bool {
        self.sites.contains(site)
    }

    pub fn sites(&self) -> &BTreeSet<T> {
        &self.sites
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn rank(&self, site: &T) -> u64 {
        (self.rank)(site)
    }
}

impl Space for FiniteKernel {
    type Site = usize;

    fn row(&self, site: &usize) -> Cow<'_, [(usize, f64)]> {
        Cow::Borrowed(FiniteKernel::row(self, *site))
    }

    fn row_sum_bound(&self) -> f64 {
        self.max_row_sum()
    }

    fn target(&self, sites: Vec<usize>) -> Target<'_, usize> {
        let dist = self.distances_to(&sites);
        Target::new(sites, move |&i| dist.get(i).copied().unwrap_or(u64::MAX))
    }
}

fn vertex_distance(a: &Vertex, b: &Vertex) -> u64 {
    match (a, b) {
        (Vertex::Tree(x), Vertex::Tree(y)) => x.distance(y),
        (Vertex::Line(x), Vertex::Line(y)) => x.abs_diff(*y),
        _ => u64::MAX,
    }
}

impl Space for RateKernel {
    type Site = Vertex;

    fn row(&self, site: &Vertex) -> Cow<'_, [(Vertex, f64)]> {
        Cow::Owned(RateKernel::row(self, site))
    }

    fn row_sum_bound(&self) -> f64 {
        RateKernel::row_sum_bound(self)
    }

    /// Ranks by graph distance to the nearest target vertex in the
    /// underlying tree or line, which ignores long-range patch entries.
    fn target(&self, sites: Vec<Vertex>) -> Target<'_, Vertex> {
        let anchors = sites.clone();
        Target::new(sites, move |v| {
            anchors.iter().map(|a| vertex_distance(v, a)).min().unwrap_or(0)
        })
    }
}

/// A radial quotient with class rows precomputed up to a depth. Sites are
/// levels; deeper rows are computed on demand.
#[derive(Clone, Debug)]
pub struct LumpedSpace {
    quotient: Quotient,
    rows: Vec<Vec<(u64, f64)>>,
    bound: f64,
}

impl LumpedSpace {
    pub fn new(quotient: Quotient, depth: u64) -> Self {
        let rows = (0..=depth).map(|j| quotient.class_row(j)).collect();
        let bound = quotient.kernel().row_sum_bound();
        Self { quotient, rows, bound }
    }

    pub fn quotient(&self) -> &Quotient {
        &self.quotient
    }
}

impl Space for LumpedSpace {
    type Site = u64;

    fn row(&self, site: &u64) -> Cow<'_, [(u64, f64)]> {
        match usize::try_from(*site).ok().and_then(|i| self.rows.get(i)) {
            Some(r) => Cow::Borrowed(r),
            None => Cow::Owned(self.quotient.class_row(*site)),
        }
    }

    fn row_sum_bound(&self) -> f64 {
        self.bound
    }

    fn target(&self, sites: Vec<u64>) -> Target<'_, u64> {
        let anchors = sites.clone();
        Target::new(sites, move |l| anchors.iter().map(|a| a.abs_diff(*l)).min().unwrap_or(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_ranking_follows_reverse_edges() {
        let k = FiniteKernel::from_dense(&[
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        let t = Space::target(&k, vec![2]);
        assert_eq!((t.rank(&0), t.rank(&1), t.rank(&2)), (2, 1, 0));
        assert!(t.contains(&2) && !t.contains(&0));
    }

    #[test]
    fn lumped_rows_match_quotient() {
        let q = RateKernel::tree(3, 0.0).unwrap().radial_quotient().unwrap();
        let s = LumpedSpace::new(q.clone(), 4);
        for j in [0, 3, 4, 9] {
            assert_eq!(s.row(&j).into_owned(), q.class_row(j));
        }
        assert_eq!(s.row_sum_bound(), 3.0);
        assert_eq!(s.target(vec![0]).rank(&5), 5);
    }

    #[test]
    fn vertex_ranking_uses_tree_metric() {
        let k = RateKernel::tree(3, 0.0).unwrap();
        let t = Space::target(&k, vec![Vertex::tree(&[1])]);
        assert_eq!(t.rank(&Vertex::tree(&[0, 2])), 3);
        assert_eq!(t.rank(&Vertex::tree(&[1, 2])), 1);
    }
}
