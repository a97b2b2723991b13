//! Permutation null for the scan maxima.
//!
//! Individuals are permuted as blocks, so every replicate only needs a new
//! edge-count profile; the null moments depend on the graph alone and are
//! reused unchanged.

use itertools::Itertools;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::counts::profile_unchecked;
use crate::error::{Error, Result};
use crate::graph::SimilarityGraph;
use crate::moments::enumerate::MAX_ENUMERATION_N;
use crate::moments::MomentProfile;
use crate::pvalue::{ActiveChannels, Channel};
use crate::rng::stream_rng;
use crate::scanstat::{check_window, point_stats};

pub const MIN_REPLICATES: usize = 100;

/// Window maxima of every channel for one ordering. Undefined channels are NaN.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChannelMaxima {
    pub out_w: f64,
    pub out_d: f64,
    pub within: f64,
    pub in_tilde: f64,
    pub m: f64,
}

impl ChannelMaxima {
    pub fn get(&self, channel: Channel) -> f64 {
        match channel {
            Channel::OutW => self.out_w,
            Channel::OutD => self.out_d,
            Channel::In => self.within,
            Channel::InTilde => self.in_tilde,
            Channel::Combined => self.m,
        }
    }
}

fn fmax(acc: f64, v: f64) -> f64 {
    if v.is_nan() || (!acc.is_nan() && acc >= v) {
        acc
    } else {
        v
    }
}

/// Channel maxima over `[n0, n1]` for individuals placed at `positions`.
pub fn window_maxima(
    g: &SimilarityGraph,
    moments: &MomentProfile,
    positions: &[usize],
    n0: usize,
    n1: usize,
) -> ChannelMaxima {
    let n = g.n();
    let active = ActiveChannels::from_profile(moments);
    let profile = profile_unchecked(g, positions);
    let mut out = ChannelMaxima {
        out_w: f64::NAN,
        out_d: f64::NAN,
        within: f64::NAN,
        in_tilde: f64::NAN,
        m: f64::NAN,
    };
    for t in n0..=n1 {
        let [zw, zd, zin, tilde, m] = point_stats(n, t, profile.at(t), moments.at(t), moments.varrho, active);
        out.out_w = fmax(out.out_w, zw);
        out.out_d = fmax(out.out_d, zd.abs());
        out.within = fmax(out.within, zin.abs());
        out.in_tilde = fmax(out.in_tilde, tilde.abs());
        out.m = fmax(out.m, m);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PermutationResult {
    /// Number of orderings evaluated (`n!` in exhaustive mode).
    pub replicates: usize,
    pub seed: u64,
    pub exhaustive: bool,
    pub n0: usize,
    pub n1: usize,
    pub observed: ChannelMaxima,
    /// Per-replicate maxima in replicate order.
    pub null_maxima: Vec<ChannelMaxima>,
    /// p-value of the observed `max M(t)`.
    pub p_value: f64,
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub fn quantile_type7(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() || !(0.0..=1.0).contains(&p) {
        return None;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

impl PermutationResult {
    /// Sorted finite null maxima of one channel.
    pub fn null_sorted(&self, channel: Channel) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .null_maxima
            .iter()
            .map(|m| m.get(channel))
            .filter(|v| v.is_finite())
            .collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Empirical `1 - alpha` quantile of a channel's null maxima.
    pub fn critical_value(&self, alpha: f64, channel: Channel) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        quantile_type7(&self.null_sorted(channel), 1.0 - alpha)
            .ok_or_else(|| Error::Degenerate(format!("channel {channel} is undefined under every ordering")))
    }

    /// p-value for the observed maximum of a channel. Monte-Carlo results use
    /// `(1 + r) / (B + 1)`; exhaustive results are exact (`r / n!`).
    pub fn channel_p_value(&self, channel: Channel) -> f64 {
        let obs = self.observed.get(channel);
        if obs.is_nan() {
            return f64::NAN;
        }
        let r = self.null_maxima.iter().filter(|m| m.get(channel) >= obs).count();
        if self.exhaustive {
            r as f64 / self.replicates as f64
        } else {
            (r + 1) as f64 / (self.replicates + 1) as f64
        }
    }
}

fn finish(
    g: &SimilarityGraph,
    moments: &MomentProfile,
    n0: usize,
    n1: usize,
    seed: u64,
    exhaustive: bool,
    null_maxima: Vec<ChannelMaxima>,
) -> PermutationResult {
    let identity: Vec<usize> = (0..g.n()).collect();
    let observed = window_maxima(g, moments, &identity, n0, n1);
    let mut res = PermutationResult {
        replicates: null_maxima.len(),
        seed,
        exhaustive,
        n0,
        n1,
        observed,
        null_maxima,
        p_value: f64::NAN,
    };
    res.p_value = res.channel_p_value(Channel::Combined);
    res
}

fn check_inputs(g: &SimilarityGraph, moments: &MomentProfile, n0: usize, n1: usize) -> Result<()> {
    if moments.n != g.n() {
        return Err(Error::Config(format!(
            "moments were computed for n = {}, graph has n = {}",
            moments.n,
            g.n()
        )));
    }
    check_window(g.n(), n0, n1)
}

/// Monte-Carlo permutation test with `replicates` uniform orderings.
/// Replicate `r` shuffles with stream `r` of `seed`.
pub fn permutation_test(
    g: &SimilarityGraph,
    moments: &MomentProfile,
    n0: usize,
    n1: usize,
    replicates: usize,
    seed: u64,
) -> Result<PermutationResult> {
    check_inputs(g, moments, n0, n1)?;
    if replicates < MIN_REPLICATES {
        return Err(Error::Config(format!(
            "at least {MIN_REPLICATES} permutations are required, got {replicates}"
        )));
    }
    let n = g.n();
    let null_maxima: Vec<ChannelMaxima> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r);
            let mut positions: Vec<usize> = (0..n).collect();
            positions.shuffle(&mut rng);
            window_maxima(g, moments, &positions, n0, n1)
        })
        .collect();
    Ok(finish(g, moments, n0, n1, seed, false, null_maxima))
}

/// Exact permutation distribution over all `n!` orderings (`n <= 8`).
pub fn exhaustive_permutation_test(
    g: &SimilarityGraph,
    moments: &MomentProfile,
    n0: usize,
    n1: usize,
) -> Result<PermutationResult> {
    check_inputs(g, moments, n0, n1)?;
    let n = g.n();
    if n > MAX_ENUMERATION_N {
        return Err(Error::UnsupportedSize(format!(
            "exhaustive permutation is limited to n <= {MAX_ENUMERATION_N}, got {n}"
        )));
    }
    let null_maxima = (0..n)
        .permutations(n)
        .map(|positions| window_maxima(g, moments, &positions, n0, n1))
        .collect();
    Ok(finish(g, moments, n0, n1, 0, true, null_maxima))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (SimilarityGraph, MomentProfile) {
        let edges = [
            (0, 1), (0, 2), (1, 3), (2, 3), (3, 4), (5, 6), (6, 7), (7, 8),
            (9, 10), (0, 11), (2, 9), (4, 7), (1, 6), (8, 10),
        ];
        let g = SimilarityGraph::from_panel_edges(&edges, 6, 2).unwrap();
        let m = MomentProfile::new(&g).unwrap();
        (g, m)
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_type7(&v, 0.0), Some(1.0));
        assert_eq!(quantile_type7(&v, 1.0), Some(5.0));
        assert_eq!(quantile_type7(&v, 0.5), Some(3.0));
        assert_eq!(quantile_type7(&v, 0.9), Some(4.6));
        assert_eq!(quantile_type7(&[], 0.5), None);
    }

    #[test]
    fn deterministic_given_seed() {
        let (g, m) = toy();
        let a = permutation_test(&g, &m, 1, 5, 200, 11).unwrap();
        let b = permutation_test(&g, &m, 1, 5, 200, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.p_value > 0.0 && a.p_value <= 1.0);
    }

    #[test]
    fn requires_enough_replicates() {
        let (g, m) = toy();
        assert!(permutation_test(&g, &m, 1, 5, 99, 0).is_err());
    }

    #[test]
    fn smoothing_bound() {
        // an observed value below every replicate gives p = 1
        let (g, m) = toy();
        let mut res = permutation_test(&g, &m, 1, 5, 100, 3).unwrap();
        res.observed.m = f64::MIN;
        assert_eq!(res.channel_p_value(Channel::Combined), 1.0);
    }

    #[test]
    fn exhaustive_counts_all_orderings() {
        let (g, m) = toy();
        let res = exhaustive_permutation_test(&g, &m, 1, 5).unwrap();
        assert_eq!(res.replicates, 720);
        assert!(res.p_value > 0.0 && res.p_value <= 1.0);
    }
}
