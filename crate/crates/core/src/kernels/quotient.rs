use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap, VecDeque};

use super::{Family, FiniteKernel, KernelError, LineDomain, RateKernel, TreeAddr, Vertex};

/// Exact lumping of a kernel by distance from the origin.
///
/// Available when every vertex at a given distance from the origin has the
/// same aggregated rates into each distance class: the plain or
/// origin-patched tree, a line kernel on ℤ whose patch is mirror symmetric,
/// and any line kernel on ℕ (classes are single vertices). Class counts of
/// the branching random walk then evolve as a branching random walk on the
/// levels, so first-return series, truncation spectra and simulation laws
/// can all be computed on the quotient.
#[derive(Clone, Debug)]
pub struct Quotient {
    kernel: RateKernel,
    kind: Kind,
    max_patched_level: Option<u64>,
}

#[derive(Clone, Copy, Debug)]
enum Kind {
    Tree { d: u32 },
    Mirror,
    HalfLine,
}

/// Rates of a birth–death chain on levels `0..=depth`, with bounds on the
/// rates of every deeper level.
#[derive(Clone, Debug, PartialEq)]
pub struct BirthDeathChain {
    /// Level `j` to itself.
    pub stay: Vec<f64>,
    /// Level `j` to `j+1`.
    pub up: Vec<f64>,
    /// Level `j` to `j-1` (`down[0] = 0`).
    pub down: Vec<f64>,
    pub tail: ChainTail,
}

/// Componentwise bounds `(stay, up, down)` on the rates of all levels past
/// the explicit part of a [`BirthDeathChain`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainTail {
    pub inf: (f64, f64, f64),
    pub sup: (f64, f64, f64),
}

const LUMP_RTOL: f64 = 1e-12;

impl BirthDeathChain {
    /// Drops trailing explicit levels whose rates already equal a homogeneous
    /// tail (`inf == sup`). Level 0 and level 1 are always kept.
    pub fn trim_homogeneous(&mut self) {
        if self.tail.inf != self.tail.sup {
            return;
        }
        let t = self.tail.sup;
        while self.stay.len() > 2 {
            let j = self.stay.len() - 1;
            if (self.stay[j], self.up[j], self.down[j]) != t {
                break;
            }
            self.stay.pop();
            self.up.pop();
            self.down.pop();
        }
    }
}

impl RateKernel {
    /// Distance-class quotient around the origin, when the kernel is exactly
    /// lumpable by distance.
    pub fn radial_quotient(&self) -> Option<Quotient> {
        let kind = match self.family() {
            Family::Tree { d, .. } => {
                if self.patch_support().any(|v| *v != Vertex::tree_root()) {
                    return None;
                }
                Kind::Tree { d: *d }
            }
            Family::Line { domain: LineDomain::N, .. } => Kind::HalfLine,
            Family::Line { domain: LineDomain::Z, .. } => Kind::Mirror,
        };
        let q = Quotient {
            kernel: self.clone(),
            kind,
            max_patched_level: None,
        };
        let max_patched_level = self.patch_support().filter_map(|v| q.level_of(v)).max();
        let q = Quotient { max_patched_level, ..q };
        if let Kind::Mirror = kind {
            for v in self.patch_support() {
                let Vertex::Line(x) = v else { return None };
                let a = q.aggregate(&self.row(&Vertex::Line(*x)));
                let b = q.aggregate(&self.row(&Vertex::Line(-*x)));
                if !same_rows(&a, &b) {
                    return None;
                }
            }
        }
        Some(q)
    }
}

fn same_rows(a: &[(u64, f64)], b: &[(u64, f64)]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|((i, r), (j, s))| {
            i == j && (r - s).abs() <= LUMP_RTOL * r.abs().max(s.abs())
        })
}

impl Quotient {
    pub fn kernel(&self) -> &RateKernel {
        &self.kernel
    }

    /// Distance class of `v`, or `None` for vertices outside the space.
    pub fn level_of(&self, v: &Vertex) -> Option<u64> {
        if !self.kernel.contains(v) {
            return None;
        }
        match (self.kind, v) {
            (Kind::Tree { .. }, Vertex::Tree(a)) => Some(a.depth() as u64),
            (Kind::Mirror, Vertex::Line(x)) => Some(x.unsigned_abs()),
            (Kind::HalfLine, Vertex::Line(x)) => Some(*x as u64),
            _ => None,
        }
    }

    /// A vertex in class `level`.
    pub fn representative(&self, level: u64) -> Vertex {
        match self.kind {
            Kind::Tree { .. } => Vertex::Tree(TreeAddr::from_digits(&vec![0; level as usize])),
            Kind::Mirror | Kind::HalfLine => Vertex::Line(level as i64),
        }
    }

    /// Number of vertices in class `level` (saturating).
    pub fn class_size(&self, level: u64) -> u128 {
        match self.kind {
            Kind::Tree { d } if level > 0 => {
                let pow = u32::try_from(level - 1).unwrap_or(u32::MAX);
                u128::from(d - 1)
                    .checked_pow(pow)
                    .and_then(|p| p.checked_mul(u128::from(d)))
                    .unwrap_or(u128::MAX)
            }
            Kind::Mirror if level > 0 => 2,
            _ => 1,
        }
    }

    fn aggregate(&self, row: &[(Vertex, f64)]) -> Vec<(u64, f64)> {
        let mut acc: BTreeMap<u64, f64> = BTreeMap::new();
        for (t, r) in row {
            if let Some(level) = self.level_of(t) {
                *acc.entry(level).or_insert(0.0) += r;
            }
        }
        acc.into_iter().collect()
    }

    /// Aggregated rates from any vertex of class `level` into each class.
    pub fn class_row(&self, level: u64) -> Vec<(u64, f64)> {
        self.aggregate(&self.kernel.row(&self.representative(level)))
    }

    /// Quotient of the ball of the given radius around the origin. Vertex `j`
    /// of the result is the representative of level `j`.
    pub fn truncate(&self, radius: usize) -> Result<FiniteKernel, KernelError> {
        let mut levels = vec![0u64];
        let mut index = HashMap::from([(0u64, 0usize)]);
        let mut rows = Vec::new();
        let mut queue = VecDeque::from([(0u64, 0usize)]);
        while let Some((level, depth)) = queue.pop_front() {
            let row = self.class_row(level);
            if depth < radius {
                for &(t, _) in &row {
                    if let Entry::Vacant(e) = index.entry(t) {
                        e.insert(levels.len());
                        levels.push(t);
                        queue.push_back((t, depth + 1));
                    }
                }
            }
            rows.push((level, row));
        }
        let mut order: Vec<usize> = (0..levels.len()).collect();
        order.sort_by_key(|&i| levels[i]);
        let position: HashMap<u64, usize> = order.iter().enumerate().map(|(p, &i)| (levels[i], p)).collect();
        let mut sorted_rows = vec![Vec::new(); levels.len()];
        for (level, row) in rows {
            sorted_rows[position[&level]] = row
                .into_iter()
                .filter_map(|(t, r)| position.get(&t).map(|&j| (j, r)))
                .collect();
        }
        let vertices = order.iter().map(|&i| self.representative(levels[i])).collect();
        FiniteKernel::from_rows(vertices, sorted_rows)
    }

    /// Number of vertices of the ball of the given radius (saturating).
    pub fn ball_size(&self, truncated: &FiniteKernel) -> u128 {
        truncated
            .vertices()
            .iter()
            .filter_map(|v| self.level_of(v))
            .fold(0u128, |acc, l| acc.saturating_add(self.class_size(l)))
    }

    /// Birth–death form with explicit levels up to at least `depth` and
    /// beyond every patched level. `None` if some class jumps by more than
    /// one level.
    pub fn birth_death(&self, depth: u64) -> Option<BirthDeathChain> {
        let depth = depth.max(self.max_patched_level.map_or(0, |m| m + 1)).max(1);
        let n = depth as usize + 1;
        let mut stay = vec![0.0; n];
        let mut up = vec![0.0; n];
        let mut down = vec![0.0; n];
        for j in 0..n {
            for (t, r) in self.class_row(j as u64) {
                match t as i64 - j as i64 {
                    0 => stay[j] = r,
                    1 => up[j] = r,
                    -1 => down[j] = r,
                    _ => return None,
                }
            }
        }
        let tail = match (self.kind, self.kernel.family()) {
            (Kind::Tree { d }, _) => {
                let f = f64::from(d - 1);
                ChainTail { inf: (0.0, f, 1.0), sup: (0.0, f, 1.0) }
            }
            (_, Family::Line { profile, .. }) => {
                let lo = profile.inf_from(depth + 1) / 2.0;
                let hi = profile.sup_from(depth + 1) / 2.0;
                ChainTail { inf: (0.0, lo, lo), sup: (0.0, hi, hi) }
            }
            _ => unreachable!("tree kind always has a tree family"),
        };
        Some(BirthDeathChain { stay, up, down, tail })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{truncate, Patch, Profile};

    #[test]
    fn tree_classes() {
        let q = RateKernel::tree(3, 0.7).unwrap().radial_quotient().unwrap();
        assert_eq!(q.class_row(0), vec![(0, 0.7), (1, 3.0)]);
        assert_eq!(q.class_row(4), vec![(3, 1.0), (5, 2.0)]);
        assert_eq!(q.class_size(0), 1);
        assert_eq!(q.class_size(3), 12);
        assert_eq!(q.level_of(&Vertex::tree(&[2, 1])), Some(2));
        let ball = q.truncate(3).unwrap();
        assert_eq!(ball.len(), 4);
        assert_eq!(q.ball_size(&ball), 22);
    }

    #[test]
    fn huge_class_sizes_saturate() {
        let q = RateKernel::tree(3, 0.0).unwrap().radial_quotient().unwrap();
        assert_eq!(q.class_size(65), 3 << 64);
        assert_eq!(q.class_size(500), u128::MAX);
    }

    #[test]
    fn off_origin_tree_patch_is_not_lumpable() {
        let k = RateKernel::tree(3, 0.0).unwrap();
        let p = Patch::new().with_row(Vertex::tree(&[0]), vec![(Vertex::tree_root(), 2.0)]);
        assert!(k.apply_patch(&p).unwrap().radial_quotient().is_none());
    }

    #[test]
    fn mirror_patch_is_lumpable_one_sided_is_not() {
        let z = RateKernel::line(LineDomain::Z, Profile::constant(1.0)).unwrap();
        let sym = Patch::new()
            .with_row(Vertex::Line(2), vec![(Vertex::Line(2), 1.0), (Vertex::Line(1), 0.5)])
            .with_row(Vertex::Line(-2), vec![(Vertex::Line(-2), 1.0), (Vertex::Line(-1), 0.5)]);
        let q = z.apply_patch(&sym).unwrap().radial_quotient().unwrap();
        assert_eq!(q.class_row(2), vec![(1, 0.5), (2, 1.0)]);
        let one = Patch::new().with_row(Vertex::Line(2), vec![(Vertex::Line(2), 1.0)]);
        assert!(z.apply_patch(&one).unwrap().radial_quotient().is_none());
    }

    #[test]
    fn line_birth_death_rates() {
        let z = RateKernel::line(LineDomain::Z, Profile::constant(1.0)).unwrap();
        let chain = z.radial_quotient().unwrap().birth_death(3).unwrap();
        assert_eq!(chain.up, vec![1.0, 0.5, 0.5, 0.5]);
        assert_eq!(chain.down, vec![0.0, 0.5, 0.5, 0.5]);
        assert_eq!(chain.tail.sup, (0.0, 0.5, 0.5));
        let mut trimmed = chain.clone();
        trimmed.trim_homogeneous();
        assert_eq!(trimmed.up, vec![1.0, 0.5]);
        let n = RateKernel::line(LineDomain::N, Profile::constant(1.0)).unwrap();
        let chain = n.radial_quotient().unwrap().birth_death(2).unwrap();
        assert_eq!(chain.up[0], 0.5);
    }

    #[test]
    fn long_jump_breaks_birth_death_form() {
        let k = RateKernel::tree(3, 0.0).unwrap();
        let p = Patch::new().with_row(Vertex::tree_root(), vec![(Vertex::tree(&[0, 1]), 1.0)]);
        let q = k.apply_patch(&p).unwrap().radial_quotient().unwrap();
        assert!(q.birth_death(4).is_none());
    }

    #[test]
    fn quotient_ball_matches_vertex_ball_row_sums() {
        let k = RateKernel::tree(4, 1.25).unwrap();
        let q = k.radial_quotient().unwrap();
        let lumped = q.truncate(3).unwrap();
        let ball = truncate(&k, &Vertex::tree_root(), 3).unwrap();
        assert_eq!(q.ball_size(&lumped), ball.len() as u128);
        for (i, v) in ball.vertices().iter().enumerate() {
            let level = q.level_of(v).unwrap() as usize;
            assert!((ball.row_sum(i) - lumped.row_sum(level)).abs() < 1e-12);
        }
    }
}
