//! k-MST similarity graphs and their split into between- and
//! within-individual edges.

use std::io::Write;

use rayon::prelude::*;

use crate::dataset::PanelDataset;
use crate::error::{Error, Result};

/// Default number of spanning-tree layers.
pub const DEFAULT_K: usize = 9;

/// Dense symmetric distance matrix with zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    size: usize,
    data: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Metric {
    #[default]
    Euclidean,
}

impl DistanceMatrix {
    pub fn from_vec(size: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != size * size {
            return Err(Error::Structural(format!(
                "distance matrix of size {size} needs {} entries, got {}",
                size * size,
                data.len()
            )));
        }
        for i in 0..size {
            if data[i * size + i] != 0.0 {
                return Err(Error::Structural(format!("nonzero diagonal at {i}")));
            }
            for j in i + 1..size {
                let (a, b) = (data[i * size + j], data[j * size + i]);
                if a != b || !(a >= 0.0) || !a.is_finite() {
                    return Err(Error::Structural(format!(
                        "entries ({i},{j}) = {a} and ({j},{i}) = {b} are not a valid distance"
                    )));
                }
            }
        }
        Ok(Self { size, data })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }
}

pub fn pairwise_distances(ds: &PanelDataset, metric: Metric) -> DistanceMatrix {
    let size = ds.node_count();
    let mut data = vec![0.0; size * size];
    data.par_chunks_mut(size).enumerate().for_each(|(i, row)| {
        let xi = ds.node(i);
        for (j, out) in row.iter_mut().enumerate() {
            if i == j {
                continue;
            }
            let xj = ds.node(j);
            *out = match metric {
                Metric::Euclidean => xi
                    .iter()
                    .zip(xj)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt(),
            };
        }
    });
    DistanceMatrix { size, data }
}

struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        true
    }
}

/// Edges of the union of `k` successive minimum spanning trees.
///
/// Layer `j` is the Kruskal tree of the complete graph with all edges of
/// layers `1..j` removed. Equal weights are ordered by `(min node, max node)`.
/// When the remaining edges can no longer span every node (tiny graphs), the
/// layer keeps the spanning forest it found. Returned pairs satisfy `u < v`.
pub fn kmst_edges(dist: &DistanceMatrix, k: usize) -> Result<Vec<(usize, usize)>> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let size = dist.size();
    if size < 2 {
        return Err(Error::Structural(format!("need at least 2 nodes, got {size}")));
    }
    let mut candidates: Vec<(f64, u32, u32)> = Vec::with_capacity(size * (size - 1) / 2);
    for i in 0..size {
        for j in i + 1..size {
            candidates.push((dist.get(i, j), i as u32, j as u32));
        }
    }
    candidates.par_sort_unstable_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut used = vec![false; candidates.len()];
    let mut edges = Vec::with_capacity(k * (size - 1));
    for _ in 0..k {
        let mut dsu = DisjointSet::new(size);
        let mut accepted = 0;
        for (idx, &(_, i, j)) in candidates.iter().enumerate() {
            if used[idx] {
                continue;
            }
            if dsu.union(i as usize, j as usize) {
                used[idx] = true;
                edges.push((i as usize, j as usize));
                accepted += 1;
                if accepted == size - 1 {
                    break;
                }
            }
        }
        if accepted == 0 {
            break;
        }
    }
    Ok(edges)
}

/// k-MST on a dataset's flattened measurements.
pub fn build_kmst(dist: &DistanceMatrix, k: usize, individual_of: &[usize]) -> Result<SimilarityGraph> {
    if individual_of.len() != dist.size() {
        return Err(Error::Structural(format!(
            "individual map has {} entries for {} nodes",
            individual_of.len(),
            dist.size()
        )));
    }
    let edges = kmst_edges(dist, k)?;
    decompose(&edges, individual_of)
}

/// Similarity graph with its individual-level multiplicity structure.
///
/// `D_uv` (u != v) counts edges between individuals `u` and `v`; `D_uu`
/// counts edges inside `u`; `D_u` is the row sum of `D` without the diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityGraph {
    n: usize,
    individual_of: Vec<usize>,
    edges: Vec<(usize, usize)>,
    out_edges: Vec<usize>,
    in_edges: Vec<usize>,
    within: Vec<u64>,
    between_degree: Vec<u64>,
    /// Off-diagonal part of `D`, one sorted row per individual.
    adjacency: Vec<Vec<(usize, u64)>>,
}

/// Splits an edge list into between- and within-individual parts.
///
/// `individual_of[node]` names the individual of each node; individuals are
/// `0..n` with `n = max + 1`.
pub fn decompose(edges: &[(usize, usize)], individual_of: &[usize]) -> Result<SimilarityGraph> {
    let node_count = individual_of.len();
    let n = individual_of.iter().max().map_or(0, |m| m + 1);
    if n < 2 {
        return Err(Error::Structural(format!("need at least 2 individuals, got {n}")));
    }
    let mut normalized = Vec::with_capacity(edges.len());
    for &(a, b) in edges {
        if a >= node_count || b >= node_count {
            return Err(Error::Structural(format!(
                "edge ({a}, {b}) references a node outside 0..{node_count}"
            )));
        }
        if a == b {
            return Err(Error::Structural(format!("self-loop at node {a}")));
        }
        normalized.push((a.min(b), a.max(b)));
    }
    let mut sorted = normalized.clone();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Structural(format!("duplicate edge {:?}", w[0])));
    }

    let mut out_edges = Vec::new();
    let mut in_edges = Vec::new();
    let mut within = vec![0u64; n];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (idx, &(a, b)) in normalized.iter().enumerate() {
        let (u, v) = (individual_of[a], individual_of[b]);
        if u == v {
            in_edges.push(idx);
            within[u] += 1;
        } else {
            out_edges.push(idx);
            pairs.push((u, v));
            pairs.push((v, u));
        }
    }
    pairs.sort_unstable();
    let mut adjacency: Vec<Vec<(usize, u64)>> = vec![Vec::new(); n];
    for (u, v) in pairs {
        match adjacency[u].last_mut() {
            Some((w, count)) if *w == v => *count += 1,
            _ => adjacency[u].push((v, 1)),
        }
    }
    let between_degree = adjacency
        .iter()
        .map(|row| row.iter().map(|&(_, c)| c).sum())
        .collect();
    Ok(SimilarityGraph {
        n,
        individual_of: individual_of.to_vec(),
        edges: normalized,
        out_edges,
        in_edges,
        within,
        between_degree,
        adjacency,
    })
}

impl SimilarityGraph {
    /// k-MST over every measurement of the dataset (Euclidean distances).
    pub fn from_dataset(ds: &PanelDataset, k: usize) -> Result<Self> {
        let dist = pairwise_distances(ds, Metric::Euclidean);
        let individual_of: Vec<usize> = (0..ds.node_count()).map(|i| ds.individual_of(i)).collect();
        build_kmst(&dist, k, &individual_of)
    }

    /// Graph over `n` individuals with `ell` consecutive nodes each.
    pub fn from_panel_edges(edges: &[(usize, usize)], n: usize, ell: usize) -> Result<Self> {
        let individual_of: Vec<usize> = (0..n * ell).map(|i| i / ell).collect();
        decompose(edges, &individual_of)
    }

    /// Number of individuals.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn node_count(&self) -> usize {
        self.individual_of.len()
    }

    pub fn individual_of(&self, node: usize) -> usize {
        self.individual_of[node]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn out_edges(&self) -> &[usize] {
        &self.out_edges
    }

    pub fn in_edges(&self) -> &[usize] {
        &self.in_edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn out_count(&self) -> usize {
        self.out_edges.len()
    }

    pub fn in_count(&self) -> usize {
        self.in_edges.len()
    }

    /// `D_uu` for every individual.
    pub fn within(&self) -> &[u64] {
        &self.within
    }

    /// `D_u` for every individual.
    pub fn between_degree(&self) -> &[u64] {
        &self.between_degree
    }

    /// Nonzero off-diagonal entries `(v, D_uv)` of row `u`, sorted by `v`.
    pub fn neighbors(&self, u: usize) -> &[(usize, u64)] {
        &self.adjacency[u]
    }

    /// Entry `D_uv`, including the diagonal.
    pub fn multiplicity(&self, u: usize, v: usize) -> u64 {
        if u == v {
            return self.within[u];
        }
        let row = &self.adjacency[u];
        row.binary_search_by_key(&v, |&(w, _)| w)
            .map_or(0, |idx| row[idx].1)
    }

    /// Whether an edge joins two measurements of the same individual.
    pub fn is_within(&self, edge: usize) -> bool {
        let (a, b) = self.edges[edge];
        self.individual_of[a] == self.individual_of[b]
    }

    /// Debug dump: one `u v in|out` line per edge, nodes numbered from 1.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (idx, &(a, b)) in self.edges.iter().enumerate() {
            let kind = if self.is_within(idx) { "in" } else { "out" };
            writeln!(w, "{} {} {kind}", a + 1, b + 1)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64]) -> DistanceMatrix {
        let n = points.len();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = (points[i] - points[j]).abs();
            }
        }
        DistanceMatrix::from_vec(n, data).unwrap()
    }

    #[test]
    fn distance_axioms() {
        let ds = PanelDataset::new(2, 1, 1, vec![0.0, 3.0], None).unwrap();
        let d = pairwise_distances(&ds, Metric::Euclidean);
        assert_eq!(d.get(0, 1), 3.0);
        let ds = PanelDataset::new(2, 1, 2, vec![1.0, 2.0, 1.0, 2.0], None).unwrap();
        assert_eq!(pairwise_distances(&ds, Metric::Euclidean).get(0, 1), 0.0);
    }

    #[test]
    fn collinear_mst() {
        let d = line(&[0.0, 1.0, 3.0]);
        let e = kmst_edges(&d, 1).unwrap();
        assert_eq!(e, vec![(0, 1), (1, 2)]);
        let w: f64 = e.iter().map(|&(a, b)| d.get(a, b)).sum();
        assert_eq!(w, 3.0);
        let mut e2 = kmst_edges(&d, 2).unwrap();
        e2.sort();
        assert_eq!(e2, vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn ties_break_lexicographically() {
        // all distances equal: Kruskal takes (0,1), (0,2), (0,3)
        let n = 4;
        let mut data = vec![1.0; n * n];
        for i in 0..n {
            data[i * n + i] = 0.0;
        }
        let d = DistanceMatrix::from_vec(n, data).unwrap();
        assert_eq!(kmst_edges(&d, 1).unwrap(), vec![(0, 1), (0, 2), (0, 3)]);
    }

    #[test]
    fn decompose_classifies_edges() {
        // ell = 3, nodes 0..6; (0,1) same individual, (2,3) individuals 0 and 1
        let g = SimilarityGraph::from_panel_edges(&[(0, 1), (2, 3)], 2, 3).unwrap();
        assert_eq!(g.in_edges(), &[0]);
        assert_eq!(g.out_edges(), &[1]);
        assert_eq!(g.within(), &[1, 0]);
        assert_eq!(g.between_degree(), &[1, 1]);
        assert_eq!(g.multiplicity(0, 1), 1);
        assert_eq!(g.multiplicity(0, 0), 1);
    }

    #[test]
    fn decompose_rejects_self_loops_and_duplicates() {
        assert!(matches!(
            SimilarityGraph::from_panel_edges(&[(1, 1)], 2, 2),
            Err(Error::Structural(_))
        ));
        assert!(SimilarityGraph::from_panel_edges(&[(0, 2), (2, 0)], 2, 2).is_err());
        assert!(SimilarityGraph::from_panel_edges(&[(0, 9)], 2, 2).is_err());
    }

    #[test]
    fn invalid_distance_matrix() {
        assert!(DistanceMatrix::from_vec(2, vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(DistanceMatrix::from_vec(2, vec![0.0, -1.0, -1.0, 0.0]).is_err());
        assert!(DistanceMatrix::from_vec(2, vec![1.0, 1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn edge_list_export() {
        let g = SimilarityGraph::from_panel_edges(&[(0, 1), (1, 2)], 2, 2).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1 2 in\n2 3 out\n");
    }
}
