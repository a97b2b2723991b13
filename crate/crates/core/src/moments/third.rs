//! Exact mixed moments (up to order three) of the edge counts under
//! uniformly random orderings of individuals.
//!
//! Let `X_u = 1` when individual `u` lands among the first `t` positions.
//! Every count is a polynomial in `X` built from three forms:
//!
//! * `Q  = sum_{u<v} D_uv X_u X_v`  (`R_out,1`)
//! * `Ld = sum_u D_u X_u`
//! * `Li = sum_u D_uu X_u`           (`R_in,1`)
//!
//! with `R_out,2 = |G_out| - Ld + Q`. `X` is the indicator of a uniform
//! `t`-subset, so `E[X_{i_1} ... X_{i_m}] = (t)_K / (n)_K` where `K` is the
//! number of distinct indices. A product of at most three forms is a sum
//! over at most six index slots; grouping assignments by the partition of
//! slots they induce gives
//!
//! `E[F_a F_b F_c] = sum_K C_K (t)_K / (n)_K`,
//!
//! where `C_K` sums the product weights over assignments with exactly `K`
//! distinct individuals. `C_K` is obtained exactly, in integers, by Möbius
//! inversion on the partition lattice from unrestricted contractions of `D`.
//! All weights are nonnegative, so the final sum has no cancellation.

use std::collections::HashMap;

use crate::graph::SimilarityGraph;

/// Basis forms; `Const` is the constant 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) enum Form {
    Const = 0,
    Pair = 1,
    Degree = 2,
    Within = 3,
}

pub(crate) const FORMS: [Form; 4] = [Form::Const, Form::Pair, Form::Degree, Form::Within];

/// Max number of distinct individuals in a product of three forms.
const MAX_K: usize = 6;

/// Falling-factorial expansion coefficients for every product of up to
/// three non-constant forms.
#[derive(Clone, Debug)]
pub(crate) struct FormMomentTable {
    n: usize,
    table: HashMap<Vec<Form>, [f64; MAX_K + 1]>,
}

impl FormMomentTable {
    pub(crate) fn new(g: &SimilarityGraph) -> Self {
        let ctx = Contractor::new(g);
        let stirling = stirling_mobius();
        let basis = [Form::Pair, Form::Degree, Form::Within];
        let mut table = HashMap::new();
        for order in 1..=3usize {
            for combo in multisets(&basis, order) {
                let coef = expansion_coefficients(&ctx, &combo, &stirling);
                table.insert(combo, coef);
            }
        }
        Self { n: g.n(), table }
    }

    /// `E[prod forms]` at split `t`; constants in `forms` are ignored.
    /// Fractional `t` evaluates the polynomial continuation in `t`.
    pub(crate) fn expect(&self, t: f64, forms: &[Form]) -> f64 {
        let mut key: Vec<Form> = forms.iter().copied().filter(|f| *f != Form::Const).collect();
        if key.is_empty() {
            return 1.0;
        }
        key.sort();
        let coef = &self.table[&key];
        let falling = falling_ratios(t, self.n);
        (1..=MAX_K).map(|k| coef[k] * falling[k]).sum()
    }

    /// Tensor `M[a][b][c] = E[F_a F_b F_c]` at split `t`.
    pub(crate) fn tensor(&self, t: f64) -> MomentTensor {
        let mut m = [[[0.0; 4]; 4]; 4];
        for a in 0..4 {
            for b in a..4 {
                for c in b..4 {
                    let v = self.expect(t, &[FORMS[a], FORMS[b], FORMS[c]]);
                    for (i, j, k) in [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
                        m[i][j][k] = v;
                    }
                }
            }
        }
        MomentTensor { m }
    }
}

/// Third-order moment tensor of the basis `(1, Q, Ld, Li)`.
#[derive(Clone, Debug)]
pub(crate) struct MomentTensor {
    m: [[[f64; 4]; 4]; 4],
}

/// Linear combination `c_0 + c_1 Q + c_2 Ld + c_3 Li`.
pub(crate) type Lin = [f64; 4];

impl MomentTensor {
    pub(crate) fn mean(&self, a: &Lin) -> f64 {
        (0..4).map(|i| a[i] * self.m[i][0][0]).sum()
    }

    #[cfg(test)]
    pub(crate) fn second(&self, a: &Lin, b: &Lin) -> f64 {
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                s += a[i] * b[j] * self.m[i][j][0];
            }
        }
        s
    }

    pub(crate) fn third(&self, a: &Lin, b: &Lin, c: &Lin) -> f64 {
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    s += a[i] * b[j] * c[k] * self.m[i][j][k];
                }
            }
        }
        s
    }

    pub(crate) fn centered(&self, a: &Lin) -> Lin {
        let mut c = *a;
        c[0] -= self.mean(a);
        c
    }

    /// `E[(A - EA)(B - EB)(C - EC)]`.
    pub(crate) fn central_third(&self, a: &Lin, b: &Lin, c: &Lin) -> f64 {
        self.third(&self.centered(a), &self.centered(b), &self.centered(c))
    }
}

/// `(t)_K / (n)_K` for `K = 0..=6`, zero once `K > n`.
fn falling_ratios(t: f64, n: usize) -> [f64; MAX_K + 1] {
    let mut out = [0.0; MAX_K + 1];
    out[0] = 1.0;
    for k in 1..=MAX_K.min(n) {
        let j = (k - 1) as f64;
        out[k] = out[k - 1] * (t - j) / (n as f64 - j);
    }
    out
}

fn multisets(basis: &[Form], order: usize) -> Vec<Vec<Form>> {
    fn rec(basis: &[Form], start: usize, left: usize, cur: &mut Vec<Form>, out: &mut Vec<Vec<Form>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..basis.len() {
            cur.push(basis[i]);
            rec(basis, i, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(basis, 0, order, &mut Vec::new(), &mut out);
    out
}

/// `s[b][k] = S(b, k) (-1)^(k-1) (k-1)!`: summing the Möbius function
/// `mu(pi, sigma)` over refinements `pi` of one block of size `b` into `k`
/// parts.
fn stirling_mobius() -> [[i128; MAX_K + 1]; MAX_K + 1] {
    let mut s2 = [[0i128; MAX_K + 1]; MAX_K + 1];
    s2[0][0] = 1;
    for b in 1..=MAX_K {
        for k in 1..=b {
            s2[b][k] = k as i128 * s2[b - 1][k] + s2[b - 1][k - 1];
        }
    }
    let mut out = [[0i128; MAX_K + 1]; MAX_K + 1];
    for b in 1..=MAX_K {
        let mut fact = 1i128;
        for k in 1..=b {
            if k > 1 {
                fact *= (k - 1) as i128;
            }
            let sign = if k % 2 == 1 { 1 } else { -1 };
            out[b][k] = s2[b][k] * sign * fact;
        }
    }
    out
}

/// Set partitions of `0..m` as restricted growth strings.
fn set_partitions(m: usize) -> Vec<Vec<usize>> {
    fn rec(pos: usize, m: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos == m {
            out.push(cur.clone());
            return;
        }
        for b in 0..=max {
            cur.push(b);
            rec(pos + 1, m, if b == max { max + 1 } else { max }, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if m == 0 {
        out.push(Vec::new());
    } else {
        rec(0, m, 0, &mut Vec::new(), &mut out);
    }
    out
}

fn expansion_coefficients(
    ctx: &Contractor,
    forms: &[Form],
    stirling: &[[i128; MAX_K + 1]; MAX_K + 1],
) -> [f64; MAX_K + 1] {
    // slot layout: each Pair takes two slots joined by an edge, the linear
    // forms one slot carrying a vertex weight
    let mut slot_weight: Vec<Option<Form>> = Vec::new();
    let mut pair_slots: Vec<(usize, usize)> = Vec::new();
    for &f in forms {
        match f {
            Form::Pair => {
                let a = slot_weight.len();
                slot_weight.push(None);
                slot_weight.push(None);
                pair_slots.push((a, a + 1));
            }
            Form::Degree | Form::Within => slot_weight.push(Some(f)),
            Form::Const => {}
        }
    }
    let mut coef = [0i128; MAX_K + 1];
    for sigma in set_partitions(slot_weight.len()) {
        if pair_slots.iter().any(|&(a, b)| sigma[a] == sigma[b]) {
            continue;
        }
        let blocks = sigma.iter().max().map_or(0, |m| m + 1);
        let mut weights: Vec<Vec<Form>> = vec![Vec::new(); blocks];
        for (slot, w) in slot_weight.iter().enumerate() {
            if let Some(f) = w {
                weights[sigma[slot]].push(*f);
            }
        }
        let edges: Vec<(usize, usize)> = pair_slots.iter().map(|&(a, b)| (sigma[a], sigma[b])).collect();
        let free = ctx.contract(&weights, &edges);
        if free == 0 {
            continue;
        }
        // lambda_K(sigma) = [z^K] prod_blocks s_{|block|}(z)
        let mut poly = vec![0i128; 1];
        poly[0] = 1;
        for block in 0..blocks {
            let size = sigma.iter().filter(|&&b| b == block).count();
            let mut next = vec![0i128; poly.len() + size];
            for (i, &p) in poly.iter().enumerate() {
                if p == 0 {
                    continue;
                }
                for k in 1..=size {
                    next[i + k] += p * stirling[size][k];
                }
            }
            poly = next;
        }
        for (k, &lambda) in poly.iter().enumerate() {
            if lambda != 0 {
                coef[k] += lambda * free;
            }
        }
    }
    // each Pair form carries a factor 1/2 (ordered pairs were summed)
    let scale = (1u32 << pair_slots.len()) as f64;
    let mut out = [0.0; MAX_K + 1];
    for k in 0..=MAX_K {
        debug_assert!(coef[k] >= 0, "injective sums are nonnegative");
        out[k] = coef[k] as f64 / scale;
    }
    out
}

/// Unrestricted contractions of `D` over small multigraphs.
struct Contractor<'a> {
    g: &'a SimilarityGraph,
    degree: Vec<i128>,
    within: Vec<i128>,
}

impl<'a> Contractor<'a> {
    fn new(g: &'a SimilarityGraph) -> Self {
        Self {
            g,
            degree: g.between_degree().iter().map(|&v| v as i128).collect(),
            within: g.within().iter().map(|&v| v as i128).collect(),
        }
    }

    fn vertex_weight(&self, forms: &[Form]) -> Vec<i128> {
        let mut w = vec![1i128; self.g.n()];
        for f in forms {
            let src = match f {
                Form::Degree => &self.degree,
                Form::Within => &self.within,
                _ => continue,
            };
            for (x, s) in w.iter_mut().zip(src) {
                *x *= s;
            }
        }
        w
    }

    /// `sum over all maps vertices -> individuals` of
    /// `prod_edges D_off(x_a, x_b) * prod_vertices weight(x_v)`.
    fn contract(&self, weights: &[Vec<Form>], edges: &[(usize, usize)]) -> i128 {
        let nv = weights.len();
        // merge parallel edges into multiplicities
        let mut mult: HashMap<(usize, usize), u32> = HashMap::new();
        for &(a, b) in edges {
            *mult.entry((a.min(b), a.max(b))).or_default() += 1;
        }
        let mut adj: Vec<Vec<(usize, u32)>> = vec![Vec::new(); nv];
        for (&(a, b), &m) in &mult {
            adj[a].push((b, m));
            adj[b].push((a, m));
        }
        for row in adj.iter_mut() {
            row.sort_unstable();
        }
        let vw: Vec<Vec<i128>> = weights.iter().map(|f| self.vertex_weight(f)).collect();

        let mut seen = vec![false; nv];
        let mut total = 1i128;
        for start in 0..nv {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut i = 0;
            while i < comp.len() {
                for &(nb, _) in &adj[comp[i]] {
                    if !seen[nb] {
                        seen[nb] = true;
                        comp.push(nb);
                    }
                }
                i += 1;
            }
            let comp_edges: usize = comp.iter().map(|&v| adj[v].len()).sum::<usize>() / 2;
            let value = if comp_edges + 1 == comp.len() {
                let root = self.tree_vector(start, usize::MAX, &adj, &vw);
                root.iter().sum()
            } else {
                debug_assert_eq!((comp.len(), comp_edges), (3, 3), "only triangles can close a cycle");
                self.triangle(&comp, &adj, &vw)
            };
            if value == 0 {
                return 0;
            }
            total *= value;
        }
        total
    }

    fn tree_vector(&self, v: usize, parent: usize, adj: &[Vec<(usize, u32)>], vw: &[Vec<i128>]) -> Vec<i128> {
        let mut acc = vw[v].clone();
        for &(c, m) in &adj[v] {
            if c == parent {
                continue;
            }
            let child = self.tree_vector(c, v, adj, vw);
            for (x, a) in acc.iter_mut().enumerate() {
                if *a == 0 {
                    continue;
                }
                let msg: i128 = self
                    .g
                    .neighbors(x)
                    .iter()
                    .map(|&(y, w)| (w as i128).pow(m) * child[y])
                    .sum();
                *a *= msg;
            }
        }
        acc
    }

    fn triangle(&self, comp: &[usize], adj: &[Vec<(usize, u32)>], vw: &[Vec<i128>]) -> i128 {
        debug_assert!(comp.iter().all(|&v| adj[v].iter().all(|&(_, m)| m == 1)));
        let (a, b, c) = (comp[0], comp[1], comp[2]);
        let n = self.g.n();
        let mut mark = vec![0i128; n];
        let mut total = 0i128;
        for x in 0..n {
            if vw[a][x] == 0 {
                continue;
            }
            for &(z, w) in self.g.neighbors(x) {
                mark[z] = w as i128;
            }
            let mut sx = 0i128;
            for &(y, wxy) in self.g.neighbors(x) {
                if vw[b][y] == 0 {
                    continue;
                }
                let mut sy = 0i128;
                for &(z, wyz) in self.g.neighbors(y) {
                    if mark[z] != 0 {
                        sy += wyz as i128 * mark[z] * vw[c][z];
                    }
                }
                sx += wxy as i128 * vw[b][y] * sy;
            }
            total += vw[a][x] * sx;
            for &(z, _) in self.g.neighbors(x) {
                mark[z] = 0;
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_counts_are_bell_numbers() {
        let bell = [1, 1, 2, 5, 15, 52, 203];
        for (m, &b) in bell.iter().enumerate() {
            assert_eq!(set_partitions(m).len(), b);
        }
    }

    #[test]
    fn mobius_sums_vanish_on_nontrivial_blocks() {
        // sum_k s(b, k) = 0 for b >= 2 (Möbius sums over an interval vanish)
        let s = stirling_mobius();
        assert_eq!(s[1][1], 1);
        for b in 2..=MAX_K {
            assert_eq!(s[b].iter().sum::<i128>(), 0);
        }
        assert_eq!(&s[3][1..=3], &[1, -3, 2]);
    }

    #[test]
    fn falling_ratio_values() {
        let f = falling_ratios(2.0, 5);
        assert!((f[1] - 0.4).abs() < 1e-15);
        assert!((f[2] - 0.1).abs() < 1e-15);
        assert_eq!(f[3], 0.0);
        let f = falling_ratios(5.0, 5);
        assert!(f[..=5].iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert_eq!(f[6], 0.0);
        // between splits the ratio follows the polynomial in t
        let f = falling_ratios(2.5, 5);
        assert!((f[3] - 2.5 * 1.5 * 0.5 / 60.0).abs() < 1e-15);
    }

    #[test]
    fn first_moments_match_closed_form() {
        // path over individuals 0-1-2-3 plus within edges, ell = 2
        let edges = [(0, 1), (1, 2), (3, 4), (5, 6), (6, 7), (2, 3)];
        let g = SimilarityGraph::from_panel_edges(&edges, 4, 2).unwrap();
        let table = FormMomentTable::new(&g);
        let (n, t) = (4.0, 2.0);
        let gout = g.out_count() as f64;
        let gin = g.in_count() as f64;
        let e_q = table.expect(2.0, &[Form::Pair]);
        assert!((e_q - t * (t - 1.0) / (n * (n - 1.0)) * gout).abs() < 1e-12);
        let e_in = table.expect(2.0, &[Form::Within]);
        assert!((e_in - t / n * gin).abs() < 1e-12);
        let e_d = table.expect(2.0, &[Form::Degree]);
        assert!((e_d - t / n * 2.0 * gout).abs() < 1e-12);
    }
}
