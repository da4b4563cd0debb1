//! Weighted precision/recall curves and their integration into AP.
//!
//! Every true positive contributes the membership weight of its ground truth,
//! every false positive the weight of its own predicted scale. Recall divides by
//! the total weight of tier-1 ground truth; precision by the weight of all
//! counted detections so far.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsum::ExactSum;
use crate::matching::{DetectionMatch, MatchOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

/// Running weighted counts after some prefix of the ranked detections.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct WeightedCounts {
    pub tp: f64,
    pub fp: f64,
    pub fn_: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    /// Counts after the last detection.
    pub counts: WeightedCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integration {
    /// Mean of the precision envelope sampled at `n` evenly spaced recall levels (COCO uses 101).
    Interpolated(usize),
    /// Trapezoid rule over the precision envelope, from recall 0 to the last reached recall.
    Trapezoidal,
}

impl Default for Integration {
    fn default() -> Self {
        Integration::Interpolated(101)
    }
}

/// Builds the weighted PR curve for one (band, category, threshold).
///
/// `records` may be in any order; they are ranked by score, descending, with a
/// stable sort. Ignored detections add nothing. Prefixes with zero counted
/// weight produce no point.
pub fn accumulate(records: &[DetectionMatch], gt_weight: f64) -> Result<PrCurve> {
    if !(gt_weight > 0.0) {
        return Err(Error::UndefinedMetric("no weighted ground truth".into()));
    }
    let mut ranked: Vec<&DetectionMatch> = records.iter().collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score));

    let mut tp = ExactSum::new();
    let mut fp = ExactSum::new();
    let mut points = Vec::with_capacity(ranked.len());
    for r in ranked {
        match r.outcome {
            MatchOutcome::TruePositive { gt_weight: w, .. } => tp.add(w),
            MatchOutcome::FalsePositive { det_weight: w } => fp.add(w),
            MatchOutcome::Ignored { .. } => continue,
        }
        let (wtp, wfp) = (tp.value(), fp.value());
        if wtp + wfp > 0.0 {
            points.push(PrPoint {
                recall: wtp / gt_weight,
                precision: wtp / (wtp + wfp),
            });
        }
    }
    let (wtp, wfp) = (tp.value(), fp.value());
    Ok(PrCurve {
        points,
        counts: WeightedCounts {
            tp: wtp,
            fp: wfp,
            fn_: (gt_weight - wtp).max(0.0),
        },
    })
}

/// Non-increasing upper hull: `envelope[i] = max(precision[i..])`.
pub fn precision_envelope(curve: &PrCurve) -> Vec<f64> {
    let mut env: Vec<f64> = curve.points.iter().map(|p| p.precision).collect();
    for i in (0..env.len().saturating_sub(1)).rev() {
        if env[i + 1] > env[i] {
            env[i] = env[i + 1];
        }
    }
    env
}

pub fn ap_from_curve(curve: &PrCurve, integration: Integration) -> f64 {
    let env = precision_envelope(curve);
    let recalls: Vec<f64> = curve.points.iter().map(|p| p.recall).collect();
    match integration {
        Integration::Interpolated(n) => {
            let n = n.max(2);
            let denom = (n - 1) as f64;
            let total: f64 = (0..n)
                .map(|i| {
                    let r = i as f64 / denom;
                    // recall is non-decreasing, so the first index reaching r carries the envelope max
                    let k = recalls.partition_point(|&x| x < r);
                    env.get(k).copied().unwrap_or(0.0)
                })
                .sum();
            total / n as f64
        }
        Integration::Trapezoidal => {
            let Some(&first) = env.first() else {
                return 0.0;
            };
            let mut area = 0.0;
            let (mut r0, mut p0) = (0.0, first);
            for (&r, &p) in recalls.iter().zip(&env) {
                area += (r - r0) * (p + p0) / 2.0;
                r0 = r;
                p0 = p;
            }
            area
        }
    }
}
