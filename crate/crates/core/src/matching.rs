//! Greedy score-ordered IoU matching of detections to ground truth, per image and category.
//!
//! Ground truth falls into two tiers for a given filter. Tier 1 is non-crowd
//! ground truth with positive membership weight; tier 2 is crowd regions and
//! ground truth the filter weights at zero. A detection takes the best tier-1
//! match if there is one; otherwise a tier-2 match makes it ignored. With a
//! rectangular filter this is exactly COCO's area-range ignore logic.

use std::cmp::Ordering;

use serde::Serialize;

use crate::data::{BoundingBox, Detection, GroundTruthObject};
use crate::error::{Error, Result};
use crate::filter::ScaleFilter;

/// COCO's cap that lets a threshold of 1.0 match boxes equal up to rounding.
const MAX_EFFECTIVE_THRESHOLD: f64 = 1.0 - 1e-10;

pub const DEFAULT_MAX_DETS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IouThresholds(Vec<f64>);

impl IouThresholds {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Value("at least one IoU threshold is required".into()));
        }
        if values.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
            return Err(Error::Value(format!("IoU thresholds must lie in (0, 1]: {values:?}")));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Value(format!(
                "IoU thresholds must be strictly increasing: {values:?}"
            )));
        }
        Ok(IouThresholds(values))
    }

    /// 0.50, 0.55, ..., 0.95.
    pub fn coco() -> Self {
        IouThresholds((0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.0.iter().position(|v| (v - t).abs() < 1e-9)
    }
}

impl Default for IouThresholds {
    fn default() -> Self {
        Self::coco()
    }
}

pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = intersection(a, b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Overlap of a detection with a crowd region: intersection over the detection's own area.
pub fn crowd_iou(det: &BoundingBox, crowd: &BoundingBox) -> f64 {
    let area = det.area();
    if area <= 0.0 {
        0.0
    } else {
        intersection(det, crowd) / area
    }
}

fn intersection(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let ih = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if iw <= 0.0 || ih <= 0.0 {
        0.0
    } else {
        iw * ih
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatchOutcome {
    TruePositive { gt_id: u64, gt_weight: f64 },
    FalsePositive { det_weight: f64 },
    Ignored { gt_id: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionMatch {
    pub det_id: u64,
    pub image_id: u64,
    pub score: f64,
    pub outcome: MatchOutcome,
}

/// Per-(category, threshold) match records pooled over images, plus the total
/// tier-1 ground-truth weight (the wTP + wFN denominator).
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub category_id: u64,
    pub threshold: f64,
    pub records: Vec<DetectionMatch>,
    pub gt_weight: f64,
}

/// Score-descending stable order, ties by input position.
pub(crate) fn score_order(dets: &[&Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| {
        dets[j]
            .score
            .total_cmp(&dets[i].score)
            .then(dets[i].id.cmp(&dets[j].id))
    });
    order
}

/// The threshold-independent part of one (image, category) cell: detections in
/// match order, ground truth by id, and their pairwise overlaps.
#[derive(Debug, Clone)]
pub(crate) struct Cell<'a> {
    pub image_id: u64,
    pub dets: Vec<&'a Detection>,
    pub gts: Vec<&'a GroundTruthObject>,
    /// Row-major `dets.len() x gts.len()`.
    pub ious: Vec<f64>,
}

impl<'a> Cell<'a> {
    pub fn new(image_id: u64, dets: &[&'a Detection], gts: &[&'a GroundTruthObject], max_dets: usize) -> Self {
        let order = score_order(dets);
        let dets: Vec<&Detection> = order.into_iter().take(max_dets).map(|i| dets[i]).collect();
        let mut gts = gts.to_vec();
        gts.sort_by_key(|g| g.id);
        let mut ious = Vec::with_capacity(dets.len() * gts.len());
        for d in &dets {
            for g in &gts {
                ious.push(if g.iscrowd {
                    crowd_iou(&d.bbox, &g.bbox)
                } else {
                    iou(&d.bbox, &g.bbox)
                });
            }
        }
        Cell {
            image_id,
            dets,
            gts,
            ious,
        }
    }

    /// Greedy assignment at one threshold. `gt_weights[j]` and `det_weights[i]`
    /// are the filter memberships of the cell's ground truth and detections.
    pub fn assign(&self, threshold: f64, gt_weights: &[f64], det_weights: &[f64], out: &mut Vec<DetectionMatch>) {
        let t = threshold.min(MAX_EFFECTIVE_THRESHOLD);
        let n_gt = self.gts.len();
        let mut taken = vec![false; n_gt];
        for (i, d) in self.dets.iter().enumerate() {
            let row = &self.ious[i * n_gt..(i + 1) * n_gt];
            let tier1 = |j: usize| !self.gts[j].iscrowd && gt_weights[j] > 0.0;
            let pick = |want_tier1: bool| {
                let mut best: Option<(usize, f64)> = None;
                for (j, &v) in row.iter().enumerate() {
                    if tier1(j) != want_tier1 || v < t {
                        continue;
                    }
                    if taken[j] && !self.gts[j].iscrowd {
                        continue;
                    }
                    // strict: equal IoU keeps the lower id
                    if best.is_none_or(|(_, b)| v.partial_cmp(&b) == Some(Ordering::Greater)) {
                        best = Some((j, v));
                    }
                }
                best.map(|(j, _)| j)
            };
            let outcome = if let Some(j) = pick(true) {
                taken[j] = true;
                MatchOutcome::TruePositive {
                    gt_id: self.gts[j].id,
                    gt_weight: gt_weights[j],
                }
            } else if let Some(j) = pick(false) {
                taken[j] = true;
                MatchOutcome::Ignored { gt_id: self.gts[j].id }
            } else {
                MatchOutcome::FalsePositive {
                    det_weight: det_weights[i],
                }
            };
            out.push(DetectionMatch {
                det_id: d.id,
                image_id: self.image_id,
                score: d.score,
                outcome,
            });
        }
    }
}

/// Matches one image's detections of one category against its ground truth.
/// Detections are taken in score order (ties by input order), at most `max_dets` of them.
pub fn match_image(
    detections: &[&Detection],
    gts: &[&GroundTruthObject],
    threshold: f64,
    filter: &ScaleFilter,
    max_dets: usize,
) -> Vec<DetectionMatch> {
    let image_id = detections
        .first()
        .map(|d| d.image_id)
        .or_else(|| gts.first().map(|g| g.image_id))
        .unwrap_or_default();
    let cell = Cell::new(image_id, detections, gts, max_dets);
    let gw: Vec<f64> = cell.gts.iter().map(|g| filter.membership(g.scale.value)).collect();
    let dw: Vec<f64> = cell.dets.iter().map(|d| filter.membership(d.scale.value)).collect();
    let mut out = Vec::with_capacity(cell.dets.len());
    cell.assign(threshold, &gw, &dw, &mut out);
    out
}
