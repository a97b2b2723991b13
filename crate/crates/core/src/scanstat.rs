//! Standardized scan processes and the max-type statistic.

use serde::Serialize;

use crate::counts::EdgeCountProfile;
use crate::error::{Error, Result};
use crate::moments::{weighted_coefficients, MomentProfile, MomentSet};
use crate::pvalue::ActiveChannels;

/// Standardized statistics for `t = 1..n-1`, stored at index `t - 1`.
///
/// Entries are NaN where the statistic is undefined (zero null variance or
/// a disabled channel); such splits never win the maximum.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanProfile {
    pub n: usize,
    pub z_out_w: Vec<f64>,
    pub z_out_d: Vec<f64>,
    pub z_in: Vec<f64>,
    pub z_in_tilde: Vec<f64>,
    pub m: Vec<f64>,
    pub active: ActiveChannels,
    pub warnings: Vec<String>,
}

/// All statistics at a single split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanPoint {
    pub t: usize,
    pub z_out_w: f64,
    pub z_out_d: f64,
    pub z_in: f64,
    pub z_in_tilde: f64,
    pub m: f64,
}

impl ScanProfile {
    pub fn at(&self, t: usize) -> ScanPoint {
        let i = t - 1;
        ScanPoint {
            t,
            z_out_w: self.z_out_w[i],
            z_out_d: self.z_out_d[i],
            z_in: self.z_in[i],
            z_in_tilde: self.z_in_tilde[i],
            m: self.m[i],
        }
    }
}

fn standardize(x: f64, mu: f64, sigma: f64) -> f64 {
    if sigma > 0.0 {
        (x - mu) / sigma
    } else {
        f64::NAN
    }
}

/// Largest of the finite arguments, NaN if none is finite.
fn nan_max(values: [f64; 3]) -> f64 {
    values
        .into_iter()
        .filter(|v| v.is_finite())
        .fold(f64::NAN, |acc, v| if acc.is_nan() || v > acc { v } else { acc })
}

/// `(z_out_w, z_out_d, z_in, z_in_tilde, m)` at one split.
#[inline]
pub(crate) fn point_stats(
    n: usize,
    t: usize,
    counts: (u64, u64, u64),
    ms: &MomentSet,
    varrho: Option<f64>,
    active: ActiveChannels,
) -> [f64; 5] {
    let (r1, r2, rin) = (counts.0 as f64, counts.1 as f64, counts.2 as f64);
    let (a, b) = weighted_coefficients(n, t);
    let rw = (a * r1 + b * r2) / (n - 2) as f64;
    let zw = standardize(rw, ms.mu_out_w, ms.sigma_out_w);
    let zd = standardize(r1 - r2, ms.mu_out_d, ms.sigma_out_d);
    let zin = standardize(rin, ms.mu_in, ms.sigma_in);
    let tilde = if !active.in_tilde {
        f64::NAN
    } else {
        match varrho {
            Some(r) => (zin - r * zd) / (1.0 - r * r).sqrt(),
            None => zin,
        }
    };
    let m = nan_max([zw, zd.abs(), tilde.abs()]);
    [zw, zd, zin, tilde, m]
}

/// Standardizes an edge-count profile with the graph's null moments.
pub fn standardized_scans(profile: &EdgeCountProfile, moments: &MomentProfile) -> Result<ScanProfile> {
    let n = profile.n;
    if moments.n != n {
        return Err(Error::Config(format!(
            "moments were computed for n = {}, counts have n = {n}",
            moments.n
        )));
    }
    let active = ActiveChannels::from_profile(moments);
    let mut warnings = Vec::new();
    if !active.in_tilde {
        let why = if profile.in_total == 0 {
            "the graph has no within-individual edges".to_string()
        } else if moments.varrho.is_some_and(|r| r.abs() >= 1.0) {
            "between- and within-individual counts are perfectly correlated".to_string()
        } else {
            "within-individual counts have zero null variance".to_string()
        };
        warnings.push(format!("within-individual channel disabled: {why}; M uses the between channels only"));
    }
    if !active.out_w || !active.out_d {
        warnings.push("a between-individual channel has zero null variance at every split".into());
    }
    let mut out = ScanProfile {
        n,
        z_out_w: Vec::with_capacity(n - 1),
        z_out_d: Vec::with_capacity(n - 1),
        z_in: Vec::with_capacity(n - 1),
        z_in_tilde: Vec::with_capacity(n - 1),
        m: Vec::with_capacity(n - 1),
        active,
        warnings,
    };
    let mut excluded = 0;
    for t in 1..n {
        let [zw, zd, zin, tilde, m] = point_stats(n, t, profile.at(t), moments.at(t), moments.varrho, active);
        if m.is_nan() {
            excluded += 1;
        }
        out.z_out_w.push(zw);
        out.z_out_d.push(zd);
        out.z_in.push(zin);
        out.z_in_tilde.push(tilde);
        out.m.push(m);
    }
    if excluded > 0 {
        out.warnings
            .push(format!("{excluded} split(s) excluded because every statistic is undefined there"));
    }
    Ok(out)
}

/// Maximizer and maximum of `M(t)` over the window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MaxStatistic {
    pub tau_hat: usize,
    pub m_star: f64,
    pub n0: usize,
    pub n1: usize,
}

pub fn check_window(n: usize, n0: usize, n1: usize) -> Result<()> {
    if n0 < 1 || n0 > n1 || n1 + 1 > n {
        return Err(Error::Domain(format!(
            "scan window [{n0}, {n1}] must satisfy 1 <= n0 <= n1 <= n - 1 with n = {n}"
        )));
    }
    Ok(())
}

/// Index of the largest finite value in `values[n0-1..n1]`, ties to the
/// smallest `t`.
pub(crate) fn argmax_window(values: &[f64], n0: usize, n1: usize) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for t in n0..=n1 {
        let v = values[t - 1];
        if v.is_nan() {
            continue;
        }
        if best.map_or(true, |(_, b)| v > b) {
            best = Some((t, v));
        }
    }
    best
}

pub fn max_statistic(scan: &ScanProfile, n0: usize, n1: usize) -> Result<MaxStatistic> {
    check_window(scan.n, n0, n1)?;
    let (tau_hat, m_star) = argmax_window(&scan.m, n0, n1).ok_or_else(|| {
        Error::Degenerate(format!("M(t) is undefined at every split of the window [{n0}, {n1}]"))
    })?;
    Ok(MaxStatistic {
        tau_hat,
        m_star,
        n0,
        n1,
    })
}

/// Window `[ceil(f0 n), n - ceil((1 - f1) n)]`, symmetric for `f1 = 1 - f0`.
pub fn window_from_fractions(n: usize, f0: f64, f1: f64) -> Result<(usize, usize)> {
    if !(f0 > 0.0 && f0 < f1 && f1 < 1.0) {
        return Err(Error::Config(format!(
            "window fractions must satisfy 0 < f0 < f1 < 1, got ({f0}, {f1})"
        )));
    }
    let nf = n as f64;
    // the small slack keeps 0.05 * 200 at 10 rather than 11
    let n0 = ((f0 * nf) - 1e-9).ceil().max(1.0) as usize;
    let n1 = n.saturating_sub((((1.0 - f1) * nf) - 1e-9).ceil().max(1.0) as usize);
    check_window(n, n0, n1)?;
    Ok((n0, n1))
}

/// Default window `n0 = ceil(0.05 n)`, `n1 = n - n0`.
pub fn default_window(n: usize) -> Result<(usize, usize)> {
    window_from_fractions(n, 0.05, 0.95)
}
