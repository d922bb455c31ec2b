//! Immutable undirected graphs in compressed sparse row form.
//!
//! Every edge is stored in both directions, neighbor lists are strictly
//! sorted, and self-loops are dropped at construction.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl Graph {
    /// Builds a graph from an arbitrary edge list.
    ///
    /// Directed pairs are symmetrized, duplicates merged and self-loops
    /// stripped. Isolated nodes are allowed.
    pub fn from_edge_list(num_nodes: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut pairs = Vec::with_capacity(edges.len() * 2);
        for &(src, dst) in edges {
            if src >= num_nodes || dst >= num_nodes {
                return Err(Error::EdgeOutOfRange {
                    src,
                    dst,
                    num_nodes,
                });
            }
            if src != dst {
                pairs.push((src, dst));
                pairs.push((dst, src));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();

        let mut offsets = vec![0usize; num_nodes + 1];
        for &(src, _) in &pairs {
            offsets[src + 1] += 1;
        }
        for v in 0..num_nodes {
            offsets[v + 1] += offsets[v];
        }
        let neighbors = pairs.into_iter().map(|(_, dst)| dst).collect();
        Ok(Self { offsets, neighbors })
    }

    /// A graph with `num_nodes` nodes and no edges.
    pub fn empty(num_nodes: usize) -> Self {
        Self {
            offsets: vec![0; num_nodes + 1],
            neighbors: Vec::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn csr_offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn csr_neighbors(&self) -> &[usize] {
        &self.neighbors
    }

    pub fn degree(&self, v: usize) -> Result<usize> {
        self.check_node(v)?;
        Ok(self.deg(v))
    }

    pub fn neighbors(&self, v: usize) -> Result<&[usize]> {
        self.check_node(v)?;
        Ok(self.adj(v))
    }

    /// Unchecked degree; panics when `v` is out of range.
    #[inline]
    pub fn deg(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    /// Unchecked neighbor slice; panics when `v` is out of range.
    #[inline]
    pub fn adj(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_nodes()).map(|v| self.deg(v)).collect()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.num_nodes())
            .map(|v| self.deg(v))
            .max()
            .unwrap_or(0)
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in CSR order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for u in 0..self.num_nodes() {
            for &v in self.adj(u) {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.num_nodes() && self.adj(u).binary_search(&v).is_ok()
    }

    /// Relabels nodes so that node `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.num_nodes() {
            return Err(Error::ShapeMismatch(format!(
                "permutation of length {} for a graph of {} nodes",
                perm.len(),
                self.num_nodes()
            )));
        }
        let edges: Vec<_> = self
            .edges()
            .into_iter()
            .map(|(u, v)| (perm[u], perm[v]))
            .collect();
        Self::from_edge_list(self.num_nodes(), &edges)
    }

    /// Disjoint union; returns the union and the node offset of each part.
    pub fn disjoint_union<'a>(graphs: impl IntoIterator<Item = &'a Graph>) -> (Graph, Vec<usize>) {
        let mut offsets = vec![0usize];
        let mut neighbors = Vec::new();
        let mut starts = Vec::new();
        let mut base = 0;
        for g in graphs {
            starts.push(base);
            for v in 0..g.num_nodes() {
                neighbors.extend(g.adj(v).iter().map(|&u| u + base));
                offsets.push(neighbors.len());
            }
            base += g.num_nodes();
        }
        starts.push(base);
        (Graph { offsets, neighbors }, starts)
    }

    /// Connected component id per node, numbered in order of first node.
    pub fn components(&self) -> Vec<usize> {
        let n = self.num_nodes();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        let mut stack = Vec::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = next;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &w in self.adj(u) {
                    if comp[w] == usize::MAX {
                        comp[w] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn is_connected(&self) -> bool {
        self.components().iter().all(|&c| c == 0)
    }

    /// The symmetric operator `D^{-1/2} A D^{-1/2}`.
    ///
    /// Rows and columns of isolated nodes are all zero.
    pub fn normalized_adjacency(&self) -> SparseSymmetric {
        let inv_sqrt: Vec<f64> = (0..self.num_nodes())
            .map(|v| match self.deg(v) {
                0 => 0.0,
                d => 1.0 / (d as f64).sqrt(),
            })
            .collect();
        let mut values = Vec::with_capacity(self.neighbors.len());
        for u in 0..self.num_nodes() {
            for &v in self.adj(u) {
                values.push(inv_sqrt[u] * inv_sqrt[v]);
            }
        }
        SparseSymmetric {
            offsets: self.offsets.clone(),
            columns: self.neighbors.clone(),
            values,
        }
    }

    fn check_node(&self, v: usize) -> Result<()> {
        if v >= self.num_nodes() {
            return Err(Error::NodeOutOfRange {
                node: v,
                num_nodes: self.num_nodes(),
            });
        }
        Ok(())
    }
}

/// Square sparse matrix in CSR layout with symmetric structure and values.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    offsets: Vec<usize>,
    columns: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymmetric {
    /// Builds the operator from a dense row-major matrix, keeping nonzeros.
    pub fn from_dense(n: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for a {n}x{n} matrix",
                entries.len()
            )));
        }
        let mut offsets = vec![0];
        let mut columns = Vec::new();
        let mut values = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let a = entries[i * n + j];
                if a != entries[j * n + i] {
                    return Err(Error::InvalidArgument(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
                if a != 0.0 {
                    columns.push(j);
                    values.push(a);
                }
            }
            offsets.push(columns.len());
        }
        Ok(Self {
            offsets,
            columns,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.columns[self.offsets[i]..self.offsets[i + 1]];
        match row.binary_search(&j) {
            Ok(pos) => self.values[self.offsets[i] + pos],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, out) in y.iter_mut().enumerate().take(self.dim()) {
            let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
            *out = self.columns[lo..hi]
                .iter()
                .zip(&self.values[lo..hi])
                .map(|(&j, &a)| a * x[j])
                .sum();
        }
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for k in self.offsets[i]..self.offsets[i + 1] {
                out[i * n + self.columns[k]] = self.values[k];
            }
        }
        out
    }

    /// Restriction to the given rows and columns, in the given order.
    pub fn submatrix(&self, keep: &[usize]) -> Self {
        let mut position = vec![usize::MAX; self.dim()];
        for (new, &old) in keep.iter().enumerate() {
            position[old] = new;
        }
        let mut offsets = vec![0];
        let mut entries: Vec<(usize, f64)> = Vec::new();
        let mut columns = Vec::new();
        let mut values = Vec::new();
        for &old in keep {
            entries.clear();
            for k in self.offsets[old]..self.offsets[old + 1] {
                let p = position[self.columns[k]];
                if p != usize::MAX {
                    entries.push((p, self.values[k]));
                }
            }
            entries.sort_by_key(|e| e.0);
            for &(c, a) in &entries {
                columns.push(c);
                values.push(a);
            }
            offsets.push(columns.len());
        }
        Self {
            offsets,
            columns,
            values,
        }
    }
}

/// Per-node class labels; `None` marks an unlabeled node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeLabels {
    labels: Vec<Option<usize>>,
    num_classes: usize,
}

impl NodeLabels {
    pub fn new(labels: Vec<Option<usize>>, num_classes: usize) -> Result<Self> {
        if let Some((node, class)) = labels
            .iter()
            .enumerate()
            .find_map(|(v, l)| l.filter(|&c| c >= num_classes).map(|c| (v, c)))
        {
            return Err(Error::InvalidArgument(format!(
                "node {node} has class {class}, expected < {num_classes}"
            )));
        }
        Ok(Self {
            labels,
            num_classes,
        })
    }

    /// Fully labeled; the class count is one past the largest class id.
    pub fn from_classes(classes: &[usize]) -> Self {
        let num_classes = classes.iter().max().map_or(0, |&c| c + 1);
        Self {
            labels: classes.iter().map(|&c| Some(c)).collect(),
            num_classes,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, v: usize) -> Option<usize> {
        self.labels.get(v).copied().flatten()
    }

    pub fn as_slice(&self) -> &[Option<usize>] {
        &self.labels
    }

    /// Labeled node ids grouped by class.
    pub fn by_class(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.num_classes];
        for (v, l) in self.labels.iter().enumerate() {
            if let Some(c) = l {
                groups[*c].push(v);
            }
        }
        groups
    }
}

/// A labeled set of graphs for graph classification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphCollection {
    graphs: Vec<Graph>,
    labels: Vec<usize>,
    num_classes: usize,
    global_max_degree: usize,
    global_max_nodes: usize,
}

impl GraphCollection {
    /// Labels must already be contiguous class ids `0..C`.
    pub fn new(graphs: Vec<Graph>, labels: Vec<usize>) -> Result<Self> {
        if graphs.len() != labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} graphs but {} labels",
                graphs.len(),
                labels.len()
            )));
        }
        let num_classes = labels.iter().max().map_or(0, |&c| c + 1);
        let mut seen = vec![false; num_classes];
        for &c in &labels {
            seen[c] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidArgument(format!(
                "graph labels skip class {missing}"
            )));
        }
        let global_max_degree = graphs.iter().map(Graph::max_degree).max().unwrap_or(0);
        let global_max_nodes = graphs.iter().map(Graph::num_nodes).max().unwrap_or(0);
        Ok(Self {
            graphs,
            labels,
            num_classes,
            global_max_degree,
            global_max_nodes,
        })
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn global_max_degree(&self) -> usize {
        self.global_max_degree
    }

    pub fn global_max_nodes(&self) -> usize {
        self.global_max_nodes
    }
}
