//! Permutation-null moments of the edge counts.
//!
//! Means, variances and covariances come from closed forms in the graph
//! aggregates `|G_out|`, `|G_in|`, `sum D_uv^2`, `sum D_u^2`, `sum D_uu^2` and
//! `sum D_uu D_u`. Third moments come from the exact falling-factorial
//! expansion in [`third`]. [`enumerate`] is the brute-force reference used by
//! the tests.

pub mod enumerate;
mod third;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::SimilarityGraph;

pub use enumerate::{enumerate_null_moments, ExactMoments, MAX_ENUMERATION_N};

pub(crate) use third::{FormMomentTable, Lin};

/// Variances at or below this are treated as zero.
pub const DEGENERATE_VARIANCE: f64 = 1e-9;

/// Integer aggregates of the multiplicity matrix `D`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GraphAggregates {
    pub n: usize,
    /// `|G_out|`
    pub out_total: f64,
    /// `|G_in|`
    pub in_total: f64,
    /// `sum_{u<v} D_uv^2`
    pub pair_sq: f64,
    /// `sum_u D_u^2`
    pub degree_sq: f64,
    /// `sum_u D_uu^2`
    pub within_sq: f64,
    /// `sum_u D_uu D_u`
    pub within_degree: f64,
}

impl GraphAggregates {
    /// Sums are accumulated exactly in integers before conversion.
    pub fn new(g: &SimilarityGraph) -> Self {
        let mut pair_sq: u128 = 0;
        for u in 0..g.n() {
            for &(v, w) in g.neighbors(u) {
                if v > u {
                    pair_sq += (w as u128) * (w as u128);
                }
            }
        }
        let deg = g.between_degree();
        let within = g.within();
        let degree_sq: u128 = deg.iter().map(|&d| (d as u128) * (d as u128)).sum();
        let within_sq: u128 = within.iter().map(|&d| (d as u128) * (d as u128)).sum();
        let within_degree: u128 = within
            .iter()
            .zip(deg)
            .map(|(&a, &b)| (a as u128) * (b as u128))
            .sum();
        Self {
            n: g.n(),
            out_total: g.out_count() as f64,
            in_total: g.in_count() as f64,
            pair_sq: pair_sq as f64,
            degree_sq: degree_sq as f64,
            within_sq: within_sq as f64,
            within_degree: within_degree as f64,
        }
    }

    /// `sum_u (D_u - 2|G_out|/n)^2`
    pub fn degree_spread(&self) -> f64 {
        self.degree_sq - 4.0 * self.out_total * self.out_total / self.n as f64
    }

    /// `sum_u (D_uu - |G_in|/n)^2`
    pub fn within_spread(&self) -> f64 {
        self.within_sq - self.in_total * self.in_total / self.n as f64
    }

    /// `sum_u D_uu D_u - 2 |G_in| |G_out| / n`
    pub fn cross_spread(&self) -> f64 {
        self.within_degree - 2.0 * self.in_total * self.out_total / self.n as f64
    }
}

/// First and second moments of `(R_out,1, R_out,2, R_in,1)` at one split.
///
/// `t` is integral for the splits of the data. The formulas are polynomials
/// in `t`, and fractional values evaluate that continuation between splits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SecondMoments {
    pub t: f64,
    pub n: usize,
    pub mean_out1: f64,
    pub mean_out2: f64,
    pub mean_in: f64,
    pub var_out1: f64,
    pub var_out2: f64,
    pub var_in: f64,
    pub cov_out12: f64,
    pub cov_out1_in: f64,
    pub cov_out2_in: f64,
}

fn check_split(n: usize, t: usize) -> Result<()> {
    if n < 4 {
        return Err(Error::UnsupportedSize(format!(
            "moment formulas need n >= 4 individuals, got {n}"
        )));
    }
    if t < 1 || t >= n {
        return Err(Error::Domain(format!("split t = {t} outside 1..{n}")));
    }
    Ok(())
}

/// Closed-form permutation moments at split `t`.
pub fn lemma1_moments(agg: &GraphAggregates, t: usize) -> Result<SecondMoments> {
    check_split(agg.n, t)?;
    Ok(second_moments_at(agg, t as f64))
}

fn second_moments_at(agg: &GraphAggregates, tf: f64) -> SecondMoments {
    let n = agg.n as f64;
    let s = n - tf;
    let gout = agg.out_total;
    let gin = agg.in_total;

    let base = n * (n - 1.0) * (n - 2.0) * (n - 3.0);
    let common = tf * (tf - 1.0) * s * (s - 1.0) / base;
    let pair_term = agg.pair_sq - 2.0 * gout * gout / (n * (n - 1.0));
    let spread = agg.degree_spread();
    // the (t-2)/(n-t-1) and (n-t-2)/(t-1) factors are cancelled against the
    // common prefactor so the end points stay finite
    let var_out1 = common * pair_term + tf * (tf - 1.0) * (tf - 2.0) * s / base * spread;
    let var_out2 = common * pair_term + tf * s * (s - 1.0) * (s - 2.0) / base * spread;
    let cov_out12 = common * (pair_term - spread);

    let cross = agg.cross_spread();
    let tri = n * (n - 1.0) * (n - 2.0);
    SecondMoments {
        t: tf,
        n: agg.n,
        mean_out1: tf * (tf - 1.0) / (n * (n - 1.0)) * gout,
        mean_out2: s * (s - 1.0) / (n * (n - 1.0)) * gout,
        mean_in: tf / n * gin,
        var_out1,
        var_out2,
        var_in: tf * s / (n * (n - 1.0)) * agg.within_spread(),
        cov_out12,
        cov_out1_in: tf * (tf - 1.0) * s / tri * cross,
        cov_out2_in: -tf * s * (s - 1.0) / tri * cross,
    }
}

/// Weights `(a, b)` with `R_out,w = (a R_out,1 + b R_out,2) / (n - 2)`.
pub fn weighted_coefficients(n: usize, t: usize) -> (f64, f64) {
    weights(n, t as f64)
}

fn weights(n: usize, t: f64) -> (f64, f64) {
    (n as f64 - t - 1.0, t - 1.0)
}

impl SecondMoments {
    pub fn mean_out_w(&self) -> f64 {
        let (a, b) = weights(self.n, self.t);
        (a * self.mean_out1 + b * self.mean_out2) / (self.n - 2) as f64
    }

    pub fn var_out_w(&self) -> f64 {
        let (a, b) = weights(self.n, self.t);
        let m = (self.n - 2) as f64;
        (a * a * self.var_out1 + b * b * self.var_out2 + 2.0 * a * b * self.cov_out12) / (m * m)
    }

    pub fn mean_out_d(&self) -> f64 {
        self.mean_out1 - self.mean_out2
    }

    pub fn var_out_d(&self) -> f64 {
        self.var_out1 + self.var_out2 - 2.0 * self.cov_out12
    }

    pub fn cov_out_d_in(&self) -> f64 {
        self.cov_out1_in - self.cov_out2_in
    }

    pub fn cov_out_w_out_d(&self) -> f64 {
        let (a, b) = weights(self.n, self.t);
        (a * (self.var_out1 - self.cov_out12) + b * (self.cov_out12 - self.var_out2)) / (self.n - 2) as f64
    }

    pub fn cov_out_w_in(&self) -> f64 {
        let (a, b) = weights(self.n, self.t);
        (a * self.cov_out1_in + b * self.cov_out2_in) / (self.n - 2) as f64
    }
}

/// Correlation between `Z_out,d(t)` and `Z_in(t)`, the same for every `t`.
/// `None` when either spread factor vanishes.
pub fn varrho_from(agg: &GraphAggregates) -> Option<f64> {
    let denom = agg.degree_spread() * agg.within_spread();
    if !(denom > DEGENERATE_VARIANCE) {
        return None;
    }
    Some((agg.cross_spread() / denom.sqrt()).clamp(-1.0, 1.0))
}

pub fn varrho(g: &SimilarityGraph) -> Result<f64> {
    varrho_from(&GraphAggregates::new(g)).ok_or_else(|| {
        Error::Degenerate(
            "correlation between between- and within-individual counts is undefined \
             (no spread in D_u or D_uu)"
                .into(),
        )
    })
}

/// Raw and central third moments at one split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThirdMoments {
    pub t: f64,
    /// `E(R_out,w^3)`
    pub raw_out_w: f64,
    /// `E(R_out,d^3)`
    pub raw_out_d: f64,
    /// `E(R_in,1^3)`
    pub raw_in: f64,
    /// `E(R_in,1^2 R_out,d)`
    pub raw_in_in_d: f64,
    /// `E(R_in,1 R_out,d^2)`
    pub raw_in_d_d: f64,
    pub central_out_w: f64,
    pub central_out_d: f64,
    pub central_in: f64,
    pub central_in_in_d: f64,
    pub central_in_d_d: f64,
}

/// Graph-dependent state needed to evaluate third moments at any split.
#[derive(Clone, Debug)]
pub struct ThirdMomentEngine {
    n: usize,
    out_total: f64,
    table: FormMomentTable,
}

impl ThirdMomentEngine {
    pub fn new(g: &SimilarityGraph) -> Self {
        Self {
            n: g.n(),
            out_total: g.out_count() as f64,
            table: FormMomentTable::new(g),
        }
    }

    pub(crate) fn basis(&self, tf: f64) -> [Lin; 5] {
        let (n, gout) = (self.n as f64, self.out_total);
        let w = (tf - 1.0) / (n - 2.0);
        [
            [0.0, 1.0, 0.0, 0.0],                 // R_out,1
            [gout, 1.0, -1.0, 0.0],               // R_out,2
            [0.0, 0.0, 0.0, 1.0],                 // R_in,1
            [w * gout, 1.0, -w, 0.0],             // R_out,w
            [-gout, 0.0, 1.0, 0.0],               // R_out,d
        ]
    }

    pub fn at(&self, t: usize) -> Result<ThirdMoments> {
        check_split(self.n, t)?;
        Ok(self.at_real(t as f64))
    }

    fn at_real(&self, t: f64) -> ThirdMoments {
        let m = self.table.tensor(t);
        let [_, _, rin, rw, rd] = self.basis(t);
        ThirdMoments {
            t,
            raw_out_w: m.third(&rw, &rw, &rw),
            raw_out_d: m.third(&rd, &rd, &rd),
            raw_in: m.third(&rin, &rin, &rin),
            raw_in_in_d: m.third(&rin, &rin, &rd),
            raw_in_d_d: m.third(&rin, &rd, &rd),
            central_out_w: m.central_third(&rw, &rw, &rw),
            central_out_d: m.central_third(&rd, &rd, &rd),
            central_in: m.central_third(&rin, &rin, &rin),
            central_in_in_d: m.central_third(&rin, &rin, &rd),
            central_in_d_d: m.central_third(&rin, &rd, &rd),
        }
    }

    #[cfg(test)]
    /// `E[A B]` for two of the basis statistics, used by tests.
    pub(crate) fn second_raw(&self, t: usize, a: usize, b: usize) -> f64 {
        let basis = self.basis(t as f64);
        self.table.tensor(t as f64).second(&basis[a], &basis[b])
    }
}

/// Third moments at split `t`.
pub fn third_moments(g: &SimilarityGraph, t: usize) -> Result<ThirdMoments> {
    ThirdMomentEngine::new(g).at(t)
}

/// Everything the scan and the tail approximations need at one split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MomentSet {
    pub t: usize,
    pub mu_out_w: f64,
    pub mu_out_d: f64,
    pub mu_in: f64,
    pub sigma_out_w: f64,
    pub sigma_out_d: f64,
    pub sigma_in: f64,
    pub cov_out1_out2: f64,
    pub cov_out1_in: f64,
    pub cov_out2_in: f64,
    /// Skewness of `Z_out,w(t)`; `None` when the channel is degenerate.
    pub gamma_out_w: Option<f64>,
    pub gamma_out_d: Option<f64>,
    pub gamma_in: Option<f64>,
    pub gamma_in_tilde: Option<f64>,
    pub varrho: Option<f64>,
}

fn sigma_of(var: f64) -> f64 {
    if var > DEGENERATE_VARIANCE {
        var.sqrt()
    } else {
        0.0
    }
}

/// Skewness of each standardized statistic at one split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Skewness {
    pub out_w: Option<f64>,
    pub out_d: Option<f64>,
    pub within: Option<f64>,
    pub in_tilde: Option<f64>,
}

impl Skewness {
    fn from_parts(second: &SecondMoments, third: &ThirdMoments, varrho: Option<f64>) -> Self {
        let sigma_out_w = sigma_of(second.var_out_w());
        let sigma_out_d = sigma_of(second.var_out_d());
        let sigma_in = sigma_of(second.var_in);
        let skew = |central: f64, sigma: f64| (sigma > 0.0).then(|| central / sigma.powi(3));
        let out_d = skew(third.central_out_d, sigma_out_d);
        let within = skew(third.central_in, sigma_in);
        let in_tilde = match (varrho, within, out_d) {
            (Some(r), Some(g_in), Some(g_d)) if r.abs() < 1.0 => {
                let in_in_d = third.central_in_in_d / (sigma_in * sigma_in * sigma_out_d);
                let in_d_d = third.central_in_d_d / (sigma_in * sigma_out_d * sigma_out_d);
                let num = g_in - 3.0 * r * in_in_d + 3.0 * r * r * in_d_d - r.powi(3) * g_d;
                Some(num / (1.0 - r * r).powf(1.5))
            }
            // no usable correlation: the orthogonalized statistic is Z_in itself
            (None, Some(g_in), _) => Some(g_in),
            _ => None,
        };
        Self {
            out_w: skew(third.central_out_w, sigma_out_w),
            out_d,
            within,
            in_tilde,
        }
    }
}

impl MomentSet {
    pub fn from_parts(second: &SecondMoments, third: &ThirdMoments, varrho: Option<f64>) -> Self {
        let skew = Skewness::from_parts(second, third, varrho);
        Self {
            t: second.t as usize,
            mu_out_w: second.mean_out_w(),
            mu_out_d: second.mean_out_d(),
            mu_in: second.mean_in,
            sigma_out_w: sigma_of(second.var_out_w()),
            sigma_out_d: sigma_of(second.var_out_d()),
            sigma_in: sigma_of(second.var_in),
            cov_out1_out2: second.cov_out12,
            cov_out1_in: second.cov_out1_in,
            cov_out2_in: second.cov_out2_in,
            gamma_out_w: skew.out_w,
            gamma_out_d: skew.out_d,
            gamma_in: skew.within,
            gamma_in_tilde: skew.in_tilde,
            varrho,
        }
    }

    pub fn skewness(&self) -> Skewness {
        Skewness {
            out_w: self.gamma_out_w,
            out_d: self.gamma_out_d,
            within: self.gamma_in,
            in_tilde: self.gamma_in_tilde,
        }
    }
}

/// Moment sets for every split `t = 1..n-1` of one graph.
///
/// Moments depend on the graph only through `D`, so a profile is computed
/// once and shared by every permutation replicate.
#[derive(Clone, Debug)]
pub struct MomentProfile {
    pub n: usize,
    pub aggregates: GraphAggregates,
    pub varrho: Option<f64>,
    sets: Vec<MomentSet>,
    engine: ThirdMomentEngine,
}

impl MomentProfile {
    pub fn new(g: &SimilarityGraph) -> Result<Self> {
        let n = g.n();
        if n < 4 {
            return Err(Error::UnsupportedSize(format!(
                "moment formulas need n >= 4 individuals, got {n}"
            )));
        }
        let aggregates = GraphAggregates::new(g);
        let varrho = varrho_from(&aggregates);
        let engine = ThirdMomentEngine::new(g);
        let sets = (1..n)
            .map(|t| {
                let second = lemma1_moments(&aggregates, t)?;
                let third = engine.at(t)?;
                Ok(MomentSet::from_parts(&second, &third, varrho))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n,
            aggregates,
            varrho,
            sets,
            engine,
        })
    }

    /// Skewness at a split `1 <= t <= n - 1` that may lie between two
    /// integer splits, from the same closed forms continued in `t`.
    pub fn skewness_at(&self, t: f64) -> Result<Skewness> {
        if !(t >= 1.0 && t <= (self.n - 1) as f64) {
            return Err(Error::Domain(format!("split t = {t} outside [1, {}]", self.n - 1)));
        }
        if t.fract() == 0.0 {
            return Ok(self.at(t as usize).skewness());
        }
        let second = second_moments_at(&self.aggregates, t);
        let third = self.engine.at_real(t);
        Ok(Skewness::from_parts(&second, &third, self.varrho))
    }

    pub fn at(&self, t: usize) -> &MomentSet {
        &self.sets[t - 1]
    }

    pub fn sets(&self) -> &[MomentSet] {
        &self.sets
    }
}
