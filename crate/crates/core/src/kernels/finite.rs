use std::collections::{HashMap, VecDeque};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use super::{check_rate, KernelError, RateKernel, Vertex};

/// Default hard cap on the number of vertices of a truncation.
pub const DEFAULT_VERTEX_CAP: usize = 1 << 20;

/// Kernel on a finite vertex set, stored row-wise.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteKernel {
    vertices: Vec<Vertex>,
    index: HashMap<Vertex, usize>,
    rows: Vec<Vec<(usize, f64)>>,
}

impl FiniteKernel {
    /// Rows are given by vertex index. Zero rates are dropped; duplicate
    /// targets and out-of-range indices are rejected.
    pub fn from_rows(vertices: Vec<Vertex>, rows: Vec<Vec<(usize, f64)>>) -> Result<Self, KernelError> {
        let n = vertices.len();
        if rows.len() != n {
            return Err(KernelError::RowShape { vertex: rows.len(), len: rows.len(), n });
        }
        let mut index = HashMap::with_capacity(n);
        for (i, v) in vertices.iter().enumerate() {
            if index.insert(v.clone(), i).is_some() {
                return Err(KernelError::Spec(format!("vertex {v} listed twice")));
            }
        }
        let mut clean = Vec::with_capacity(n);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|e| e.0);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(KernelError::DuplicateTarget(
                        vertices[i].to_string(),
                        vertices[w[0].0].to_string(),
                    ));
                }
            }
            for &(j, r) in &row {
                check_rate(r)?;
                if j >= n {
                    return Err(KernelError::RowShape { vertex: i, len: j + 1, n });
                }
            }
            row.retain(|e| e.1 > 0.0);
            clean.push(row);
        }
        Ok(Self { vertices, index, rows: clean })
    }

    /// Kernel from a dense matrix; vertex `i` is `Vertex::Line(i)`.
    pub fn from_dense(matrix: &[Vec<f64>]) -> Result<Self, KernelError> {
        let n = matrix.len();
        let vertices = (0..n as i64).map(Vertex::Line).collect();
        let mut rows = Vec::with_capacity(n);
        for (i, r) in matrix.iter().enumerate() {
            if r.len() != n {
                return Err(KernelError::RowShape { vertex: i, len: r.len(), n });
            }
            rows.push(r.iter().copied().enumerate().collect());
        }
        Self::from_rows(vertices, rows)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn index_of(&self, v: &Vertex) -> Option<usize> {
        self.index.get(v).copied()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.rows[i].iter().find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|e| e.1).sum()
    }

    pub fn max_row_sum(&self) -> f64 {
        (0..self.len()).map(|i| self.row_sum(i)).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(Vec::is_empty)
    }

    /// `out = K x`.
    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.iter().map(|&(j, r)| r * x[j]).sum();
        }
    }

    /// Whether `k_ij = k_ji` for all pairs, compared exactly.
    pub fn is_symmetric(&self) -> bool {
        self.rows
            .iter()
            .enumerate()
            .all(|(i, row)| row.iter().all(|&(j, r)| self.rate(j, i).to_bits() == r.to_bits()))
    }

    /// Whether `k_ij > 0` exactly when `k_ji > 0`.
    pub fn has_symmetric_support(&self) -> bool {
        self.rows
            .iter()
            .enumerate()
            .all(|(i, row)| row.iter().all(|&(j, _)| self.rate(j, i) > 0.0))
    }

    /// `(diagonal, super-diagonal, sub-diagonal)` when every row `i` only
    /// reaches `i-1`, `i`, `i+1`.
    pub fn tridiagonal(&self) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let n = self.len();
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n.saturating_sub(1)];
        let mut lower = vec![0.0; n.saturating_sub(1)];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, r) in row {
                if j == i {
                    diag[i] = r;
                } else if j == i + 1 {
                    upper[i] = r;
                } else if j + 1 == i {
                    lower[j] = r;
                } else {
                    return None;
                }
            }
        }
        Some((diag, upper, lower))
    }

    /// Hop distance from every vertex to the set `targets` (`u64::MAX` when unreachable).
    pub fn distances_to(&self, targets: &[usize]) -> Vec<u64> {
        let n = self.len();
        let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, _) in row {
                incoming[j].push(i);
            }
        }
        let mut dist = vec![u64::MAX; n];
        let mut queue = VecDeque::new();
        for &t in targets {
            if dist[t] != 0 {
                dist[t] = 0;
                queue.push_back(t);
            }
        }
        while let Some(y) = queue.pop_front() {
            for &x in &incoming[y] {
                if dist[x] == u64::MAX {
                    dist[x] = dist[y] + 1;
                    queue.push_back(x);
                }
            }
        }
        dist
    }
}

/// Restriction of `kernel` to the vertices reachable from `center` in at
/// most `radius` steps along positive-rate edges. Vertices appear in BFS order,
/// so the center has index 0.
pub fn truncate(kernel: &RateKernel, center: &Vertex, radius: usize) -> Result<FiniteKernel, KernelError> {
    truncate_with_cap(kernel, center, radius, DEFAULT_VERTEX_CAP)
}

pub fn truncate_with_cap(
    kernel: &RateKernel,
    center: &Vertex,
    radius: usize,
    cap: usize,
) -> Result<FiniteKernel, KernelError> {
    if !kernel.contains(center) {
        return Err(KernelError::InvalidVertex(center.to_string(), kernel.family().name()));
    }
    let mut vertices = vec![center.clone()];
    let mut index = HashMap::from([(center.clone(), 0usize)]);
    let mut full_rows = Vec::new();
    let mut frontier = 0..1;
    for depth in 0..=radius {
        let range = frontier.clone();
        for i in range {
            let row = kernel.row(&vertices[i]);
            if depth < radius {
                for (t, _) in &row {
                    if !index.contains_key(t) {
                        index.insert(t.clone(), vertices.len());
                        vertices.push(t.clone());
                        if vertices.len() > cap {
                            return Err(KernelError::Oversize { cap, reached: vertices.len() });
                        }
                    }
                }
            }
            full_rows.push(row);
        }
        frontier = frontier.end..vertices.len();
    }
    let rows = full_rows
        .into_iter()
        .map(|row| {
            row.into_iter()
                .filter_map(|(t, r)| index.get(&t).map(|&j| (j, r)))
                .collect()
        })
        .collect();
    FiniteKernel::from_rows(vertices, rows)
}

/// Communicating classes of a finite kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    /// Strongly connected components, each sorted, ordered by smallest member.
    pub classes: Vec<Vec<usize>>,
    /// All rates are zero.
    pub degenerate: bool,
}

impl AssumptionReport {
    pub fn is_irreducible(&self) -> bool {
        self.classes.len() == 1 && !self.degenerate
    }
}

/// Irreducibility report. The non-singularity condition holds automatically
/// for the discrete-time counterpart, since every particle dies childless
/// with positive probability; only the all-zero kernel is flagged.
pub fn check_assumption(kernel: &FiniteKernel) -> AssumptionReport {
    let mut graph = DiGraph::<(), ()>::with_capacity(kernel.len(), 0);
    let nodes: Vec<_> = (0..kernel.len()).map(|_| graph.add_node(())).collect();
    for i in 0..kernel.len() {
        for &(j, _) in kernel.row(i) {
            graph.add_edge(nodes[i], nodes[j], ());
        }
    }
    let mut classes: Vec<Vec<usize>> = tarjan_scc(&graph)
        .into_iter()
        .map(|c| {
            let mut c: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
            c.sort_unstable();
            c
        })
        .collect();
    // A single vertex without a loop is still its own class.
    classes.sort();
    AssumptionReport {
        classes,
        degenerate: kernel.is_zero(),
    }
}
