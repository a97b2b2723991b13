//! Analytic tail probabilities of the scan statistics.
//!
//! For a threshold `b` and window `[n0, n1]` every channel uses
//!
//! `P(max Z > b) ~ c b phi(b) * int_{n0/n}^{n1/n} K(nx) h(n, x) nu(b sqrt(2 h(n, x) / n)) dx`
//!
//! with `c = 1` for `Z_out,w` and `c = 2` for the two-sided channels. `K = 1`
//! gives the plain Gaussian-process approximation (A1); the skewness
//! corrected version (A2) uses the per-`t` third moments.

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc};

use crate::error::{Error, Result};
use crate::moments::MomentProfile;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Overshoot correction `nu(x) = (2/x)(Phi(x/2) - 1/2) / ((x/2) Phi(x/2) + phi(x/2))`.
pub fn nu(x: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("nu is defined for finite x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    let half = x / 2.0;
    // Phi(x/2) - 1/2 via erf keeps relative accuracy near zero
    let centered = 0.5 * erf(half / std::f64::consts::SQRT_2);
    Ok((2.0 / x) * centered / (half * normal_cdf(half) + normal_pdf(half)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HValues {
    pub out_w: f64,
    pub out_d: f64,
    pub within: f64,
}

/// Finite-sample `h` functions at `x = t/n`.
pub fn h_functions(n: usize, x: f64) -> Result<HValues> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Domain(format!("h functions need 0 < x < 1, got {x}")));
    }
    let nf = n as f64;
    let denom = 2.0 * x * (1.0 - x) * (nf * nf * x * x - nf * nf * x + nf - 1.0);
    if denom == 0.0 {
        return Err(Error::Domain(format!("h_out,w denominator vanishes at n={n}, x={x}")));
    }
    let out_w = (nf - 1.0) * (2.0 * nf * x * x - 2.0 * nf * x + 1.0) / denom;
    let two_sided = 1.0 / (2.0 * x * (1.0 - x));
    Ok(HValues {
        out_w,
        out_d: two_sided,
        within: two_sided,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    OutW,
    OutD,
    In,
    InTilde,
    Combined,
}

impl Channel {
    pub const SINGLE: [Channel; 4] = [Channel::OutW, Channel::OutD, Channel::In, Channel::InTilde];

    pub fn name(self) -> &'static str {
        match self {
            Channel::OutW => "out_w",
            Channel::OutD => "out_d",
            Channel::In => "in",
            Channel::InTilde => "in_tilde",
            Channel::Combined => "combined",
        }
    }

    fn two_sided(self) -> bool {
        !matches!(self, Channel::OutW)
    }
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Correction {
    A1,
    #[default]
    A2,
}

impl std::str::FromStr for Correction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A1" => Ok(Correction::A1),
            "A2" => Ok(Correction::A2),
            other => Err(Error::Config(format!("unknown correction {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailQuery {
    pub b: f64,
    pub n: usize,
    pub n0: usize,
    pub n1: usize,
    pub channel: Channel,
    pub correction: Correction,
    /// Quadrature nodes per unit of `t`; 1 puts nodes on the integer splits.
    pub refine: usize,
}

impl TailQuery {
    pub fn new(b: f64, n: usize, n0: usize, n1: usize, channel: Channel, correction: Correction) -> Self {
        Self {
            b,
            n,
            n0,
            n1,
            channel,
            correction,
            refine: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.b > 0.0) || !self.b.is_finite() {
            return Err(Error::Domain(format!("threshold b must be positive, got {}", self.b)));
        }
        if !(1 <= self.n0 && self.n0 < self.n1 && self.n1 < self.n) {
            return Err(Error::Domain(format!(
                "window [{}, {}] must satisfy 1 <= n0 < n1 <= n - 1 with n = {}",
                self.n0, self.n1, self.n
            )));
        }
        if self.refine == 0 {
            return Err(Error::Domain("refine must be at least 1".into()));
        }
        Ok(())
    }
}

/// A tail probability with quadrature diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailProbability {
    /// Clamped to `[0, 1]`.
    pub p_value: f64,
    pub raw: f64,
    pub nodes: usize,
    /// Nodes whose skewness correction was undefined (`1 + 2 gamma b <= 0`
    /// or degenerate moments) and contributed nothing.
    pub dropped_nodes: usize,
    /// Every node was dropped and the uncorrected value was returned instead.
    pub fell_back_to_a1: bool,
}

/// Skewness-correction factor `K` for skewness `gamma` at threshold `b`.
/// `None` when `1 + 2 gamma b <= 0`.
pub fn skew_factor(gamma: f64, b: f64) -> Option<f64> {
    let disc = 1.0 + 2.0 * gamma * b;
    if !(disc > 0.0) {
        return None;
    }
    let root = disc.sqrt();
    // (-1 + sqrt(1 + 2 gamma b)) / gamma without the 0/0 at gamma = 0
    let theta = 2.0 * b / (1.0 + root);
    let k = (0.5 * (b - theta).powi(2) + gamma * theta.powi(3) / 6.0).exp() / root;
    k.is_finite().then_some(k)
}

fn h_for(channel: Channel, n: usize, x: f64) -> Result<f64> {
    match channel {
        Channel::OutW => Ok(h_functions(n, x)?.out_w),
        Channel::OutD | Channel::In | Channel::InTilde if x > 0.0 && x < 1.0 => Ok(1.0 / (2.0 * x * (1.0 - x))),
        Channel::Combined => unreachable!("combined channel has no single kernel"),
        _ => Err(Error::Domain(format!("h functions need 0 < x < 1, got {x}"))),
    }
}

/// Skewness of a channel at a split that may lie between integer splits.
fn gamma_at(profile: &MomentProfile, channel: Channel, t: f64) -> Result<Option<f64>> {
    let s = profile.skewness_at(t)?;
    Ok(match channel {
        Channel::OutW => s.out_w,
        Channel::OutD => s.out_d,
        Channel::In => s.within,
        Channel::InTilde => s.in_tilde,
        Channel::Combined => None,
    })
}

/// Composite Simpson on equally spaced samples (3/8 rule on the last three
/// intervals when the interval count is odd).
fn simpson(values: &[f64], step: f64) -> f64 {
    let m = values.len().saturating_sub(1);
    match m {
        0 => 0.0,
        1 => 0.5 * step * (values[0] + values[1]),
        _ => {
            let even = if m % 2 == 0 { m } else { m - 3 };
            let mut s = 0.0;
            let mut i = 0;
            while i < even {
                s += values[i] + 4.0 * values[i + 1] + values[i + 2];
                i += 2;
            }
            let mut total = s * step / 3.0;
            if even < m {
                let v = &values[even..];
                total += 3.0 * step / 8.0 * (v[0] + 3.0 * v[1] + 3.0 * v[2] + v[3]);
            }
            total
        }
    }
}

fn integrate(q: &TailQuery, profile: Option<&MomentProfile>) -> Result<TailProbability> {
    q.validate()?;
    if q.channel == Channel::Combined {
        return Err(Error::Domain("use combined_pvalue for the max-type statistic".into()));
    }
    let n = q.n as f64;
    // h_out,w has poles at t = 1 and t = n - 1, where Z_out,w has no variance
    let (lo, hi) = match q.channel {
        Channel::OutW => (q.n0.max(2), q.n1.min(q.n - 2)),
        _ => (q.n0, q.n1),
    };
    let intervals = hi.saturating_sub(lo) * q.refine;
    let step_t = 1.0 / q.refine as f64;
    let mut values = Vec::with_capacity(intervals + 1);
    let mut dropped = 0;
    for i in 0..=intervals {
        if hi < lo {
            break;
        }
        let t = lo as f64 + i as f64 * step_t;
        let x = t / n;
        let h = h_for(q.channel, q.n, x)?;
        let base = h * nu(q.b * (2.0 * h / n).sqrt())?;
        let k = match (q.correction, profile) {
            (Correction::A1, _) => Some(1.0),
            (Correction::A2, Some(p)) => gamma_at(p, q.channel, t)?.and_then(|g| skew_factor(g, q.b)),
            (Correction::A2, None) => {
                return Err(Error::Config("skewness correction needs the graph's moments".into()))
            }
        };
        let v = match k {
            Some(k) => k * base,
            None => {
                dropped += 1;
                0.0
            }
        };
        if !v.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite integrand at t = {t} for channel {} (b = {}, h = {h})",
                q.channel, q.b
            )));
        }
        values.push(v);
    }
    let factor = if q.channel.two_sided() { 2.0 } else { 1.0 };
    let raw = factor * q.b * normal_pdf(q.b) * simpson(&values, step_t / n);
    Ok(TailProbability {
        p_value: raw.clamp(0.0, 1.0),
        raw,
        nodes: values.len(),
        dropped_nodes: dropped,
        fell_back_to_a1: false,
    })
}

/// Uncorrected tail probability; does not depend on the graph.
pub fn pvalue_a1(q: &TailQuery) -> Result<TailProbability> {
    let q = TailQuery {
        correction: Correction::A1,
        ..*q
    };
    integrate(&q, None)
}

/// Skewness-corrected tail probability. Falls back to A1 when no node has a
/// valid correction.
pub fn pvalue_a2(q: &TailQuery, profile: &MomentProfile) -> Result<TailProbability> {
    if profile.n != q.n {
        return Err(Error::Config(format!(
            "moments were computed for n = {}, query has n = {}",
            profile.n, q.n
        )));
    }
    let q = TailQuery {
        correction: Correction::A2,
        ..*q
    };
    let res = integrate(&q, Some(profile))?;
    if res.nodes > 0 && res.dropped_nodes == res.nodes {
        let mut fallback = pvalue_a1(&q)?;
        fallback.dropped_nodes = res.dropped_nodes;
        fallback.fell_back_to_a1 = true;
        return Ok(fallback);
    }
    Ok(res)
}

pub fn pvalue(q: &TailQuery, profile: Option<&MomentProfile>) -> Result<TailProbability> {
    match (q.correction, profile) {
        (Correction::A1, _) => pvalue_a1(q),
        (Correction::A2, Some(p)) => pvalue_a2(q, p),
        (Correction::A2, None) => Err(Error::Config("skewness correction needs the graph's moments".into())),
    }
}

/// Channels that enter the max-type statistic for a graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ActiveChannels {
    pub out_w: bool,
    pub out_d: bool,
    pub in_tilde: bool,
}

impl ActiveChannels {
    pub const ALL: ActiveChannels = ActiveChannels {
        out_w: true,
        out_d: true,
        in_tilde: true,
    };

    pub fn from_profile(profile: &MomentProfile) -> Self {
        let sets = profile.sets();
        Self {
            out_w: sets.iter().any(|m| m.sigma_out_w > 0.0),
            out_d: sets.iter().any(|m| m.sigma_out_d > 0.0),
            in_tilde: sets.iter().any(|m| m.sigma_in > 0.0)
                && profile.varrho.map_or(true, |r| r.abs() < 1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CombinedPValue {
    pub p_value: f64,
    pub out_w: Option<TailProbability>,
    pub out_d: Option<TailProbability>,
    pub in_tilde: Option<TailProbability>,
}

/// Product combination of the channel tail probabilities:
/// `p_M = 1 - (1 - p_out,w)(1 - p_out,d)(1 - p_in~)` over active channels.
pub fn combine(p_out_w: f64, p_out_d: f64, p_in_tilde: f64) -> f64 {
    let keep = |p: f64| 1.0 - p.clamp(0.0, 1.0);
    (1.0 - keep(p_out_w) * keep(p_out_d) * keep(p_in_tilde)).clamp(0.0, 1.0)
}

pub fn combined_pvalue(
    b: f64,
    n0: usize,
    n1: usize,
    profile: &MomentProfile,
    correction: Correction,
) -> Result<CombinedPValue> {
    let active = ActiveChannels::from_profile(profile);
    let run = |on: bool, channel: Channel| -> Result<Option<TailProbability>> {
        if !on {
            return Ok(None);
        }
        let q = TailQuery::new(b, profile.n, n0, n1, channel, correction);
        pvalue(&q, Some(profile)).map(Some)
    };
    let out_w = run(active.out_w, Channel::OutW)?;
    let out_d = run(active.out_d, Channel::OutD)?;
    let in_tilde = run(active.in_tilde, Channel::InTilde)?;
    let p = |t: &Option<TailProbability>| t.map_or(0.0, |t| t.p_value);
    Ok(CombinedPValue {
        p_value: combine(p(&out_w), p(&out_d), p(&in_tilde)),
        out_w,
        out_d,
        in_tilde,
    })
}

/// Lower and upper ends of the threshold search.
pub const CRITICAL_BRACKET: (f64, f64) = (0.5, 10.0);

/// Threshold `b` whose tail probability equals `alpha`.
pub fn critical_value(
    alpha: f64,
    channel: Channel,
    correction: Correction,
    n: usize,
    n0: usize,
    n1: usize,
    profile: Option<&MomentProfile>,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let tail = |b: f64| -> Result<f64> {
        match channel {
            Channel::Combined => {
                let profile = profile.ok_or_else(|| {
                    Error::Config("the combined channel needs the graph's moments".into())
                })?;
                Ok(combined_pvalue(b, n0, n1, profile, correction)?.p_value)
            }
            _ => Ok(pvalue(&TailQuery::new(b, n, n0, n1, channel, correction), profile)?.p_value),
        }
    };
    let (mut lo, mut hi) = CRITICAL_BRACKET;
    let (f_lo, f_hi) = (tail(lo)? - alpha, tail(hi)? - alpha);
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(Error::Numerical(format!(
            "no sign change for channel {channel}: p({lo}) - alpha = {f_lo}, p({hi}) - alpha = {f_hi}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f = tail(mid)? - alpha;
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
