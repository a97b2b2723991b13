//! Single change-point test: graph, scan, max statistic, p-values, decision.

use serde::{Deserialize, Serialize};

use crate::counts::observed_profile;
use crate::dataset::PanelDataset;
use crate::error::{Error, Result};
use crate::graph::{SimilarityGraph, DEFAULT_K};
use crate::moments::MomentProfile;
use crate::permutation::permutation_test;
use crate::pvalue::{combined_pvalue, pvalue, Channel, Correction, TailProbability, TailQuery};
use crate::scanstat::{argmax_window, check_window, max_statistic, standardized_scans, window_from_fractions};

/// Scan window, either as fractions of `n` or as explicit splits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Fractions(f64, f64),
    Explicit(usize, usize),
}

impl Default for Window {
    fn default() -> Self {
        Window::Fractions(0.05, 0.95)
    }
}

impl Window {
    pub fn resolve(&self, n: usize) -> Result<(usize, usize)> {
        match *self {
            Window::Fractions(f0, f1) => window_from_fractions(n, f0, f1),
            Window::Explicit(n0, n1) => {
                check_window(n, n0, n1)?;
                Ok((n0, n1))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub k: usize,
    pub window: Window,
    pub alpha: f64,
    pub correction: Correction,
    /// Permutation replicates; 0 keeps the test purely analytic.
    pub permutations: usize,
    pub seed: u64,
    /// Decide with the permutation p-value instead of the analytic one.
    pub decide_by_permutation: bool,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            window: Window::default(),
            alpha: 0.05,
            correction: Correction::A2,
            permutations: 0,
            seed: 0,
            decide_by_permutation: false,
        }
    }
}

impl DetectConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.decide_by_permutation && self.permutations == 0 {
            return Err(Error::Config("a permutation decision needs permutations > 0".into()));
        }
        Ok(())
    }
}

/// One constituent statistic of the max-type test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChannelReport {
    pub channel: Channel,
    /// Value at the estimated change-point.
    pub at_tau: f64,
    /// Maximum over the window (absolute value for two-sided channels).
    pub window_max: f64,
    pub window_argmax: usize,
    /// Analytic tail probability of the window maximum.
    pub p_value: f64,
    pub permutation_p_value: Option<f64>,
    pub dropped_nodes: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GraphSummary {
    pub nodes: usize,
    pub edges: usize,
    pub out_edges: usize,
    pub in_edges: usize,
    pub varrho: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PermutationSummary {
    pub replicates: usize,
    pub seed: u64,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetectionReport {
    pub n: usize,
    pub n0: usize,
    pub n1: usize,
    pub alpha: f64,
    pub correction: Correction,
    /// Estimated change-point: the last individual before the change.
    pub tau_hat: usize,
    pub m_star: f64,
    /// Analytic p-value of the max-type statistic.
    pub p_value: f64,
    pub reject: bool,
    pub channels: Vec<ChannelReport>,
    pub graph: GraphSummary,
    pub permutation: Option<PermutationSummary>,
    pub warnings: Vec<String>,
}

fn tail(b: f64, n: usize, n0: usize, n1: usize, channel: Channel, cfg: &DetectConfig, m: &MomentProfile) -> Result<Option<TailProbability>> {
    // n0 == n1 leaves nothing to integrate; the analytic approximation needs
    // a proper interval
    if !(b > 0.0) || n0 >= n1 {
        return Ok(None);
    }
    pvalue(&TailQuery::new(b, n, n0, n1, channel, cfg.correction), Some(m)).map(Some)
}

/// Runs the test on a prebuilt graph over an explicit window.
pub fn detect_graph(g: &SimilarityGraph, n0: usize, n1: usize, cfg: &DetectConfig) -> Result<DetectionReport> {
    cfg.validate()?;
    let n = g.n();
    check_window(n, n0, n1)?;
    let moments = MomentProfile::new(g)?;
    let scan = standardized_scans(&observed_profile(g), &moments)?;
    let best = max_statistic(&scan, n0, n1)?;
    let mut warnings = scan.warnings.clone();

    let p_value = if best.m_star > 0.0 && n0 < n1 {
        let combined = combined_pvalue(best.m_star, n0, n1, &moments, cfg.correction)?;
        for t in [combined.out_w, combined.out_d, combined.in_tilde].into_iter().flatten() {
            if t.fell_back_to_a1 {
                warnings.push("skewness correction undefined at every node; used the uncorrected approximation".into());
            }
        }
        combined.p_value
    } else {
        if n0 == n1 {
            warnings.push("window holds a single split; analytic p-value set to 1".into());
        }
        1.0
    };

    let perm = if cfg.permutations > 0 {
        Some(permutation_test(g, &moments, n0, n1, cfg.permutations, cfg.seed)?)
    } else {
        None
    };

    let series: [(Channel, &Vec<f64>, bool); 4] = [
        (Channel::OutW, &scan.z_out_w, false),
        (Channel::OutD, &scan.z_out_d, true),
        (Channel::In, &scan.z_in, true),
        (Channel::InTilde, &scan.z_in_tilde, true),
    ];
    let mut channels = Vec::with_capacity(4);
    for (channel, values, two_sided) in series {
        let folded: Vec<f64> = if two_sided { values.iter().map(|v| v.abs()).collect() } else { values.clone() };
        let Some((argmax, max)) = argmax_window(&folded, n0, n1) else {
            continue;
        };
        let tp = tail(max, n, n0, n1, channel, cfg, &moments)?;
        channels.push(ChannelReport {
            channel,
            at_tau: values[best.tau_hat - 1],
            window_max: max,
            window_argmax: argmax,
            p_value: tp.map_or(1.0, |t| t.p_value),
            permutation_p_value: perm.as_ref().map(|p| p.channel_p_value(channel)),
            dropped_nodes: tp.map_or(0, |t| t.dropped_nodes),
        });
    }

    let permutation = perm.as_ref().map(|p| PermutationSummary {
        replicates: p.replicates,
        seed: p.seed,
        p_value: p.p_value,
    });
    let decision_p = match (&permutation, cfg.decide_by_permutation) {
        (Some(p), true) => p.p_value,
        _ => p_value,
    };
    Ok(DetectionReport {
        n,
        n0,
        n1,
        alpha: cfg.alpha,
        correction: cfg.correction,
        tau_hat: best.tau_hat,
        m_star: best.m_star,
        p_value,
        reject: decision_p < cfg.alpha,
        channels,
        graph: GraphSummary {
            nodes: g.node_count(),
            edges: g.edge_count(),
            out_edges: g.out_count(),
            in_edges: g.in_count(),
            varrho: moments.varrho,
        },
        permutation,
        warnings,
    })
}

/// Builds the k-MST of the dataset and runs the test over the configured window.
pub fn detect(ds: &PanelDataset, cfg: &DetectConfig) -> Result<DetectionReport> {
    cfg.validate()?;
    let (n0, n1) = cfg.window.resolve(ds.n())?;
    let g = SimilarityGraph::from_dataset(ds, cfg.k)?;
    detect_graph(&g, n0, n1, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate, Family, GeneratorConfig};

    #[test]
    fn detects_a_strong_shift() {
        let mut gc = GeneratorConfig::setting(Family::Gaussian, 3, 20, 5).unwrap();
        gc.beta[1] = vec![1.5];
        let ds = generate(&gc, 40, 3, 10).unwrap();
        let report = detect(&ds, &DetectConfig::default()).unwrap();
        assert!(report.reject, "{report:?}");
        assert!((report.tau_hat as i64 - 20).abs() <= 3, "{report:?}");
        assert_eq!(report.channels.len(), 4);
        assert!(report.p_value < 1e-3);
    }

    #[test]
    fn config_validation() {
        let bad = DetectConfig {
            alpha: 1.5,
            ..DetectConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = DetectConfig {
            decide_by_permutation: true,
            ..DetectConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn permutation_summary_is_attached() {
        let gc = GeneratorConfig::setting(Family::Gaussian, 1, 15, 1).unwrap();
        let ds = generate(&gc, 30, 2, 4).unwrap();
        let cfg = DetectConfig {
            permutations: 199,
            seed: 4,
            ..DetectConfig::default()
        };
        let report = detect(&ds, &cfg).unwrap();
        let perm = report.permutation.unwrap();
        assert_eq!(perm.replicates, 199);
        assert!(perm.p_value > 0.0 && perm.p_value <= 1.0);
    }
}
