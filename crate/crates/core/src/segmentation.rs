//! Multiple change-points by recursive binary segmentation.
//!
//! Each segment gets its own k-MST and its own test. A significant segment is
//! split at its estimate and both halves are tested again.

use serde::Serialize;

use crate::dataset::PanelDataset;
use crate::detect::{detect_graph, DetectConfig, DetectionReport};
use crate::error::{Error, Result};
use crate::graph::SimilarityGraph;
use crate::pvalue::Channel;
use crate::rng::derive_seed;

/// Smallest segment the moment formulas accept.
pub const MIN_SEGMENT_FLOOR: usize = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SegmentationConfig {
    pub detect: DetectConfig,
    /// Minimum segment length; `None` uses `max(4, 2 ceil(0.05 n))`.
    pub min_seg: Option<usize>,
    /// Test at depth `k` with `alpha / 2^k`.
    pub bonferroni: bool,
    pub max_depth: Option<usize>,
}


pub fn default_min_segment(n: usize) -> usize {
    let ceil5 = (n * 5).div_ceil(100);
    MIN_SEGMENT_FLOOR.max(2 * ceil5)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChangePoint {
    /// Last individual (1-based) before the change.
    pub position: usize,
    pub p_value: f64,
    pub channel_p_values: Vec<(Channel, f64)>,
    pub depth: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SegmentOutcome {
    Tested {
        /// Global position of the segment's estimate.
        tau_hat: usize,
        p_value: f64,
        alpha: f64,
        reject: bool,
        channel_p_values: Vec<(Channel, f64)>,
    },
    TooShort,
    DepthLimit,
    Failed {
        reason: String,
    },
}

/// One tested (or skipped) segment; individuals `start + 1 ..= end`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SegmentNode {
    pub start: usize,
    pub end: usize,
    pub depth: usize,
    pub outcome: SegmentOutcome,
    pub children: Vec<SegmentNode>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SegmentationResult {
    pub min_seg: usize,
    pub change_points: Vec<ChangePoint>,
    pub tree: SegmentNode,
}

struct Ctx<'a> {
    ds: &'a PanelDataset,
    cfg: &'a SegmentationConfig,
    min_seg: usize,
}

fn test_segment(ctx: &Ctx, start: usize, end: usize, alpha: f64) -> Result<Option<DetectionReport>> {
    let len = end - start;
    if len < 2 * ctx.min_seg || len < MIN_SEGMENT_FLOOR {
        return Ok(None);
    }
    let (n0, n1) = ctx.cfg.detect.window.resolve(len)?;
    let (n0, n1) = (n0.max(ctx.min_seg), n1.min(len - ctx.min_seg));
    if n0 > n1 {
        return Ok(None);
    }
    let seg = ctx.ds.slice(start..end)?;
    let g = SimilarityGraph::from_dataset(&seg, ctx.cfg.detect.k)?;
    let detect_cfg = DetectConfig {
        alpha,
        seed: derive_seed(ctx.cfg.detect.seed, &[start as u64, end as u64]),
        ..ctx.cfg.detect
    };
    detect_graph(&g, n0, n1, &detect_cfg).map(Some)
}

fn recurse(ctx: &Ctx, start: usize, end: usize, depth: usize) -> SegmentNode {
    let leaf = |outcome| SegmentNode {
        start,
        end,
        depth,
        outcome,
        children: Vec::new(),
    };
    if ctx.cfg.max_depth.is_some_and(|m| depth > m) {
        return leaf(SegmentOutcome::DepthLimit);
    }
    let alpha = if ctx.cfg.bonferroni {
        ctx.cfg.detect.alpha / 2f64.powi(depth as i32)
    } else {
        ctx.cfg.detect.alpha
    };
    let report = match test_segment(ctx, start, end, alpha) {
        Ok(Some(r)) => r,
        Ok(None) => return leaf(SegmentOutcome::TooShort),
        Err(e) => {
            return leaf(SegmentOutcome::Failed {
                reason: e.to_string(),
            })
        }
    };
    let tau = start + report.tau_hat;
    let outcome = SegmentOutcome::Tested {
        tau_hat: tau,
        p_value: report.p_value,
        alpha,
        reject: report.reject,
        channel_p_values: report.channels.iter().map(|c| (c.channel, c.p_value)).collect(),
    };
    let children = if report.reject {
        let (left, right) = rayon::join(|| recurse(ctx, start, tau, depth + 1), || recurse(ctx, tau, end, depth + 1));
        vec![left, right]
    } else {
        Vec::new()
    };
    SegmentNode {
        start,
        end,
        depth,
        outcome,
        children,
    }
}

fn collect(node: &SegmentNode, out: &mut Vec<ChangePoint>) {
    if let SegmentOutcome::Tested {
        tau_hat,
        p_value,
        reject: true,
        ref channel_p_values,
        ..
    } = node.outcome
    {
        out.push(ChangePoint {
            position: tau_hat,
            p_value,
            channel_p_values: channel_p_values.clone(),
            depth: node.depth,
        });
    }
    for child in &node.children {
        collect(child, out);
    }
}

/// Recursive binary segmentation of the whole sequence.
pub fn binary_segmentation(ds: &PanelDataset, cfg: &SegmentationConfig) -> Result<SegmentationResult> {
    cfg.detect.validate()?;
    let n = ds.n();
    let min_seg = cfg.min_seg.unwrap_or_else(|| default_min_segment(n));
    if min_seg < MIN_SEGMENT_FLOOR {
        return Err(Error::Config(format!(
            "min_seg must be at least {MIN_SEGMENT_FLOOR}, got {min_seg}"
        )));
    }
    let ctx = Ctx { ds, cfg, min_seg };
    let tree = recurse(&ctx, 0, n, 0);
    let mut change_points = Vec::new();
    collect(&tree, &mut change_points);
    change_points.sort_by_key(|c| c.position);
    Ok(SegmentationResult {
        min_seg,
        change_points,
        tree,
    })
}
