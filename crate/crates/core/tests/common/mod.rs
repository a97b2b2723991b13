//! Shared helpers for the integration tests: random small graphs and the
//! comparison of analytic moments against exhaustive enumeration.

#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;
use rmcpd::dataset::PanelDataset;
use rmcpd::graph::SimilarityGraph;
use rmcpd::moments::enumerate::{enumerate_all_splits, IntLin};
use rmcpd::moments::{lemma1_moments, third_moments, varrho_from, GraphAggregates};
use rmcpd::rng::stream_rng;

/// Gaussian panel with independent N(0, 1) entries.
pub fn random_panel(n: usize, ell: usize, d: usize, seed: u64) -> PanelDataset {
    let mut rng = stream_rng(seed, 0);
    let values = (0..n * ell * d).map(|_| rng.sample(StandardNormal)).collect();
    PanelDataset::new(n, ell, d, values, None).unwrap()
}

/// Graph `i` of the oracle corpus: n in 4..=7, ell in 1..=3, k in 1..=2,
/// with every combination visited before any repeats.
pub fn corpus_graph(i: usize) -> (SimilarityGraph, usize, usize, usize) {
    let n = 4 + i % 4;
    let ell = 1 + (i / 4) % 3;
    let k = 1 + (i / 12) % 2;
    let ds = random_panel(n, ell, 2, 1000 + i as u64);
    (SimilarityGraph::from_dataset(&ds, k).unwrap(), n, ell, k)
}

/// Largest absolute deviations between the analytic moments and the
/// enumeration over all n! orderings, at every split.
#[derive(Debug, Default, Clone, Copy)]
pub struct OracleErrors {
    pub lemma1: f64,
    pub third: f64,
    /// `Cov(Z_w, Z_d)`, `Cov(Z_w, Z_in)`, `Cov(Z~_in, Z_d)`, and
    /// `Var(Z_in - r Z_d) - (1 - r^2)`.
    pub orthogonality: f64,
    /// `|Corr(Z_d, Z_in) - varrho|` where both channels vary.
    pub varrho: f64,
    pub splits: usize,
    /// Splits skipped by the orthogonality checks because a variance vanishes.
    pub degenerate_splits: usize,
}

fn upd(slot: &mut f64, v: f64) {
    if v.is_nan() {
        *slot = f64::INFINITY;
    } else if v > *slot {
        *slot = v;
    }
}

pub fn oracle_errors(g: &SimilarityGraph) -> OracleErrors {
    let n = g.n();
    let agg = GraphAggregates::new(g);
    let exact = enumerate_all_splits(g).unwrap();
    let varrho = varrho_from(&agg);
    let mut e = OracleErrors::default();
    for t in 1..n {
        let x = &exact[t - 1];
        let s = lemma1_moments(&agg, t).unwrap();
        let (r1, r2, rin): (IntLin, IntLin, IntLin) = ([1, 0, 0], [0, 1, 0], [0, 0, 1]);
        let pairs = [
            (s.mean_out1, x.mean(&r1)),
            (s.mean_out2, x.mean(&r2)),
            (s.mean_in, x.mean(&rin)),
            (s.var_out1, x.cov(&r1, &r1)),
            (s.var_out2, x.cov(&r2, &r2)),
            (s.var_in, x.cov(&rin, &rin)),
            (s.cov_out12, x.cov(&r1, &r2)),
            (s.cov_out1_in, x.cov(&r1, &rin)),
            (s.cov_out2_in, x.cov(&r2, &rin)),
        ];
        for (a, b) in pairs {
            upd(&mut e.lemma1, (a - b).abs());
        }

        // R_w = (a R1 + b R2) / (n - 2) with integer a, b
        let w: IntLin = [(n - t - 1) as i64, (t - 1) as i64, 0];
        let scale = ((n - 2) as f64).powi(3);
        let d: IntLin = [1, -1, 0];
        let th = third_moments(g, t).unwrap();
        let pairs = [
            (th.raw_out_w, x.raw_product(&[w, w, w]) / scale),
            (th.raw_out_d, x.raw_product(&[d, d, d])),
            (th.raw_in, x.raw_product(&[rin, rin, rin])),
            (th.raw_in_in_d, x.raw_product(&[rin, rin, d])),
            (th.raw_in_d_d, x.raw_product(&[rin, d, d])),
            (th.central_out_w, x.central_third(&w, &w, &w) / scale),
            (th.central_out_d, x.central_third(&d, &d, &d)),
            (th.central_in, x.central_third(&rin, &rin, &rin)),
            (th.central_in_in_d, x.central_third(&rin, &rin, &d)),
            (th.central_in_d_d, x.central_third(&rin, &d, &d)),
        ];
        for (a, b) in pairs {
            upd(&mut e.third, (a - b).abs());
        }

        // orthogonality with analytic standardization and analytic varrho
        let sw = s.var_out_w().sqrt();
        let sd = s.var_out_d().sqrt();
        let si = s.var_in.sqrt();
        e.splits += 1;
        let tiny = 1e-9;
        if sw > tiny && sd > tiny {
            upd(&mut e.orthogonality, (x.cov(&w, &d) / (n - 2) as f64 / (sw * sd)).abs());
        }
        if sw > tiny && si > tiny {
            upd(&mut e.orthogonality, (x.cov(&w, &rin) / (n - 2) as f64 / (sw * si)).abs());
        }
        match varrho {
            Some(r) if sd > tiny && si > tiny => {
                let corr = x.cov(&rin, &d) / (si * sd);
                upd(&mut e.varrho, (corr - r).abs());
                let var_zd = x.cov(&d, &d) / (sd * sd);
                let var_zi = x.cov(&rin, &rin) / (si * si);
                let perp_var = var_zi - 2.0 * r * corr + r * r * var_zd;
                upd(&mut e.orthogonality, (perp_var - (1.0 - r * r)).abs());
                if r.abs() < 1.0 {
                    let cov_tilde_d = (corr - r * var_zd) / (1.0 - r * r).sqrt();
                    upd(&mut e.orthogonality, cov_tilde_d.abs());
                }
            }
            _ => e.degenerate_splits += 1,
        }
    }
    e
}
