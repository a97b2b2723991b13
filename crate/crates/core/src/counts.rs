//! Edge-count profiles `R_out,1(t)`, `R_out,2(t)`, `R_in,1(t)` for every
//! split `t = 1..n-1`.

use crate::error::{Error, Result};
use crate::graph::SimilarityGraph;

/// Counts for `t = 1..n-1`, stored at index `t - 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeCountProfile {
    pub n: usize,
    pub out_total: u64,
    pub in_total: u64,
    /// Between-individual edges with both ends among the first `t` individuals.
    pub r_out1: Vec<u64>,
    /// Between-individual edges with both ends after `t`.
    pub r_out2: Vec<u64>,
    /// Within-individual edges of the first `t` individuals.
    pub r_in1: Vec<u64>,
}

impl EdgeCountProfile {
    pub fn at(&self, t: usize) -> (u64, u64, u64) {
        (self.r_out1[t - 1], self.r_out2[t - 1], self.r_in1[t - 1])
    }
}

/// Checks that `positions[u]` is a permutation of `0..n`.
pub fn validate_ordering(positions: &[usize], n: usize) -> Result<()> {
    if positions.len() != n {
        return Err(Error::Structural(format!(
            "ordering has {} entries for {n} individuals",
            positions.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in positions {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::Structural(format!(
                "ordering is not a permutation of 0..{n} (position {p})"
            )));
        }
    }
    Ok(())
}

/// Profile with individual `u` placed at time position `positions[u]`
/// (0-based). The identity ordering gives the observed sequence.
pub fn edge_count_profile(g: &SimilarityGraph, positions: &[usize]) -> Result<EdgeCountProfile> {
    validate_ordering(positions, g.n())?;
    Ok(profile_unchecked(g, positions))
}

pub fn observed_profile(g: &SimilarityGraph) -> EdgeCountProfile {
    let identity: Vec<usize> = (0..g.n()).collect();
    profile_unchecked(g, &identity)
}

/// Difference-array sweep over the nonzero entries of `D`.
pub(crate) fn profile_unchecked(g: &SimilarityGraph, positions: &[usize]) -> EdgeCountProfile {
    let n = g.n();
    // diff arrays indexed by 1-based t, slot n absorbs out-of-range starts
    let mut up1 = vec![0i64; n + 1];
    let mut down2 = vec![0i64; n + 1];
    let mut up_in = vec![0i64; n + 1];
    for u in 0..n {
        let pu = positions[u];
        for &(v, w) in g.neighbors(u) {
            if v <= u {
                continue;
            }
            let pv = positions[v];
            let w = w as i64;
            // counted in group 1 once both are placed: t >= max + 1
            up1[pu.max(pv) + 1] += w;
            // counted in group 2 while both are still ahead: t <= min
            down2[pu.min(pv) + 1] -= w;
            down2[1] += w;
        }
        let within = g.within()[u] as i64;
        if within > 0 {
            up_in[pu + 1] += within;
        }
    }
    let mut r_out1 = Vec::with_capacity(n - 1);
    let mut r_out2 = Vec::with_capacity(n - 1);
    let mut r_in1 = Vec::with_capacity(n - 1);
    let (mut a, mut b, mut c) = (0i64, 0i64, 0i64);
    for t in 1..n {
        a += up1[t];
        b += down2[t];
        c += up_in[t];
        r_out1.push(a as u64);
        r_out2.push(b as u64);
        r_in1.push(c as u64);
    }
    EdgeCountProfile {
        n,
        out_total: g.out_count() as u64,
        in_total: g.in_count() as u64,
        r_out1,
        r_out2,
        r_in1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_out_edge() {
        // ell = 1: individuals = nodes; edge between positions 2 and 5 (1-based)
        let g = SimilarityGraph::from_panel_edges(&[(1, 4)], 6, 1).unwrap();
        let p = observed_profile(&g);
        assert_eq!(p.r_out1, vec![0, 0, 0, 0, 1]);
        assert_eq!(p.r_out2, vec![1, 0, 0, 0, 0]);
        assert_eq!(p.r_in1, vec![0; 5]);
    }

    #[test]
    fn single_in_edge() {
        // ell = 2, n = 4; within edge of the third individual (nodes 4, 5)
        let g = SimilarityGraph::from_panel_edges(&[(4, 5)], 4, 2).unwrap();
        let p = observed_profile(&g);
        assert_eq!(p.r_in1, vec![0, 0, 1]);
    }

    #[test]
    fn rejects_non_permutations() {
        let g = SimilarityGraph::from_panel_edges(&[(0, 1)], 3, 1).unwrap();
        assert!(edge_count_profile(&g, &[0, 0, 1]).is_err());
        assert!(edge_count_profile(&g, &[0, 1]).is_err());
        assert!(edge_count_profile(&g, &[0, 1, 3]).is_err());
        assert!(edge_count_profile(&g, &[2, 0, 1]).is_ok());
    }

    #[test]
    fn ordering_moves_individuals() {
        // individual 0 placed last
        let g = SimilarityGraph::from_panel_edges(&[(0, 1)], 3, 1).unwrap();
        let p = edge_count_profile(&g, &[2, 0, 1]).unwrap();
        assert_eq!(p.r_out1, vec![0, 0]);
        assert_eq!(p.r_out2, vec![0, 0]);
        let p = edge_count_profile(&g, &[1, 0, 2]).unwrap();
        assert_eq!(p.r_out1, vec![0, 1]);
        assert_eq!(p.r_out2, vec![0, 0]);
    }
}
