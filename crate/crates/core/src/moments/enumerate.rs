//! Exact permutation moments by visiting all `n!` orderings.
//!
//! Every count is an integer, so power sums are accumulated exactly in
//! `i128`; central moments are formed from exact numerators and only the
//! final division happens in floating point.

use itertools::Itertools;

use crate::counts::profile_unchecked;
use crate::error::{Error, Result};
use crate::graph::SimilarityGraph;

/// Largest `n` accepted by the enumeration (8! = 40320 orderings).
pub const MAX_ENUMERATION_N: usize = 8;

/// Integer coefficients on `(R_out,1, R_out,2, R_in,1)`.
pub type IntLin = [i64; 3];

/// Exact power sums of `(R_out,1, R_out,2, R_in,1)` at one split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactMoments {
    pub t: usize,
    /// Number of orderings visited (`n!`).
    pub count: i128,
    /// `sums[a][b][c] = sum over orderings of R_out,1^a R_out,2^b R_in,1^c`.
    sums: [[[i128; 4]; 4]; 4],
}

impl ExactMoments {
    fn new(t: usize) -> Self {
        Self {
            t,
            count: 0,
            sums: [[[0; 4]; 4]; 4],
        }
    }

    fn add(&mut self, r: [i128; 3]) {
        self.count += 1;
        let pow = |x: i128| [1, x, x * x, x * x * x];
        let (p1, p2, p3) = (pow(r[0]), pow(r[1]), pow(r[2]));
        for a in 0..4 {
            for b in 0..4 - a {
                for c in 0..4 - a - b {
                    self.sums[a][b][c] += p1[a] * p2[b] * p3[c];
                }
            }
        }
    }

    /// Exact power sum; `a + b + c <= 3`.
    pub fn raw_sum(&self, a: usize, b: usize, c: usize) -> i128 {
        assert!(a + b + c <= 3, "only moments up to order three are tracked");
        self.sums[a][b][c]
    }

    /// `E(R_out,1^a R_out,2^b R_in,1^c)`.
    pub fn raw(&self, a: usize, b: usize, c: usize) -> f64 {
        self.raw_sum(a, b, c) as f64 / self.count as f64
    }

    /// `sum over orderings of prod_i (lins[i] . R)`.
    fn product_sum(&self, lins: &[IntLin]) -> i128 {
        let mut total = 0i128;
        let mut exps = [0usize; 3];
        fn rec(s: &ExactMoments, lins: &[IntLin], exps: &mut [usize; 3], coef: i128, total: &mut i128) {
            match lins.split_first() {
                None => *total += coef * s.sums[exps[0]][exps[1]][exps[2]],
                Some((first, rest)) => {
                    for k in 0..3 {
                        if first[k] == 0 {
                            continue;
                        }
                        exps[k] += 1;
                        rec(s, rest, exps, coef * first[k] as i128, total);
                        exps[k] -= 1;
                    }
                }
            }
        }
        rec(self, lins, &mut exps, 1, &mut total);
        total
    }

    /// `E[prod_i (lins[i] . R)]` for up to three factors.
    pub fn raw_product(&self, lins: &[IntLin]) -> f64 {
        assert!(lins.len() <= 3, "only moments up to order three are tracked");
        self.product_sum(lins) as f64 / self.count as f64
    }

    pub fn mean(&self, a: &IntLin) -> f64 {
        self.product_sum(&[*a]) as f64 / self.count as f64
    }

    pub fn cov(&self, a: &IntLin, b: &IntLin) -> f64 {
        let n = self.count;
        let num = n * self.product_sum(&[*a, *b]) - self.product_sum(&[*a]) * self.product_sum(&[*b]);
        num as f64 / (n as f64 * n as f64)
    }

    /// `E[(A - EA)(B - EB)(C - EC)]`.
    pub fn central_third(&self, a: &IntLin, b: &IntLin, c: &IntLin) -> f64 {
        let n = self.count;
        let (sa, sb, sc) = (self.product_sum(&[*a]), self.product_sum(&[*b]), self.product_sum(&[*c]));
        let num = n * n * self.product_sum(&[*a, *b, *c])
            - n * (self.product_sum(&[*a, *b]) * sc
                + self.product_sum(&[*a, *c]) * sb
                + self.product_sum(&[*b, *c]) * sa)
            + 2 * sa * sb * sc;
        num as f64 / (n as f64).powi(3)
    }
}

/// Exact moments at every split `t = 1..n-1` (index `t - 1`).
pub fn enumerate_all_splits(g: &SimilarityGraph) -> Result<Vec<ExactMoments>> {
    let n = g.n();
    if n > MAX_ENUMERATION_N {
        return Err(Error::UnsupportedSize(format!(
            "enumeration is limited to n <= {MAX_ENUMERATION_N}, got {n}"
        )));
    }
    let mut out: Vec<ExactMoments> = (1..n).map(ExactMoments::new).collect();
    for positions in (0..n).permutations(n) {
        let p = profile_unchecked(g, &positions);
        for (idx, acc) in out.iter_mut().enumerate() {
            acc.add([p.r_out1[idx] as i128, p.r_out2[idx] as i128, p.r_in1[idx] as i128]);
        }
    }
    Ok(out)
}

/// Exact moments up to order three at split `t`.
pub fn enumerate_null_moments(g: &SimilarityGraph, t: usize) -> Result<ExactMoments> {
    if t < 1 || t >= g.n() {
        return Err(Error::Domain(format!("split t = {t} outside 1..{}", g.n())));
    }
    Ok(enumerate_all_splits(g)?.swap_remove(t - 1))
}
