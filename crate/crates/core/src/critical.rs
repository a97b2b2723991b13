//! Critical-value tables comparing the analytic approximations with the
//! permutation null.

use serde::Serialize;

use crate::error::Result;
use crate::graph::SimilarityGraph;
use crate::moments::MomentProfile;
use crate::permutation::permutation_test;
use crate::pvalue::{critical_value, ActiveChannels, Channel, Correction};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CriticalRow {
    pub channel: Channel,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub permutation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalValueTable {
    pub n: usize,
    pub n0: usize,
    pub n1: usize,
    pub alpha: f64,
    pub permutations: usize,
    pub seed: u64,
    pub rows: Vec<CriticalRow>,
}

/// A1 values for the single channels need no graph. With a graph the table
/// adds A2 values, the combined statistic, and (for `permutations > 0`)
/// empirical quantiles.
pub fn critical_value_table(
    n: usize,
    n0: usize,
    n1: usize,
    alpha: f64,
    graph: Option<&SimilarityGraph>,
    permutations: usize,
    seed: u64,
) -> Result<CriticalValueTable> {
    let moments = graph.map(MomentProfile::new).transpose()?;
    let perm = match (graph, &moments) {
        (Some(g), Some(m)) if permutations > 0 => Some(permutation_test(g, m, n0, n1, permutations, seed)?),
        _ => None,
    };
    let active = moments.as_ref().map(ActiveChannels::from_profile);
    let mut rows = Vec::new();
    for channel in [Channel::OutW, Channel::OutD, Channel::In, Channel::InTilde, Channel::Combined] {
        let a1 = if channel == Channel::Combined {
            match &moments {
                Some(m) => Some(critical_value(alpha, channel, Correction::A1, n, n0, n1, Some(m))?),
                None => None,
            }
        } else {
            Some(critical_value(alpha, channel, Correction::A1, n, n0, n1, None)?)
        };
        let enabled = match (channel, active) {
            (Channel::In | Channel::InTilde, Some(a)) => a.in_tilde,
            _ => true,
        };
        let a2 = match &moments {
            Some(m) if enabled => Some(critical_value(alpha, channel, Correction::A2, n, n0, n1, Some(m))?),
            _ => None,
        };
        let permutation = match &perm {
            Some(p) => p.critical_value(alpha, channel).ok(),
            None => None,
        };
        rows.push(CriticalRow {
            channel,
            a1,
            a2,
            permutation,
        });
    }
    Ok(CriticalValueTable {
        n,
        n0,
        n1,
        alpha,
        permutations,
        seed,
        rows,
    })
}

impl CriticalValueTable {
    pub fn row(&self, channel: Channel) -> Option<&CriticalRow> {
        self.rows.iter().find(|r| r.channel == channel)
    }

    /// Fixed-width text rendering, one row per channel.
    pub fn to_text(&self) -> String {
        let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
        let mut s = format!(
            "n = {}, window = [{}, {}], alpha = {}\n{:<10} {:>8} {:>8} {:>8}\n",
            self.n, self.n0, self.n1, self.alpha, "channel", "A1", "A2", "Per"
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{:<10} {:>8} {:>8} {:>8}\n",
                r.channel.name(),
                cell(r.a1),
                cell(r.a2),
                cell(r.permutation)
            ));
        }
        s
    }
}
