//! Scale-wise average precision for object detectors.
//!
//! Objects are weighted by band-pass membership functions over their scale
//! (rectangular, triangular, or trapezoidal in log scale), and AP is computed
//! from weighted true-positive, false-positive and false-negative counts. The
//! COCO and ASAP rectangular banks and the BandASAP triangular/trapezoidal
//! bank are provided as presets.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod chart;
pub mod cli;
pub mod data;
pub mod error;
pub mod evaluate;
pub mod filter;
pub mod fsum;
pub mod matching;
pub mod report;
pub mod synth;
pub mod weighted_ap;

pub use data::{
    compute_scale, load_detections, load_ground_truth, BoundingBox, Dataset, Detection, GroundTruthObject, ScaleKind,
    ScaleMode, ScaleValue,
};
pub use error::{Error, Result};
pub use evaluate::{evaluate_suite, BandResult, EvalParams, MetricReport};
pub use filter::{
    effective_count, make_asap_bank, make_band_asap_bank, make_coco_bank, make_default_band_asap_bank, FilterBank,
    FilterShape, ScaleFilter,
};
pub use matching::{iou, match_image, IouThresholds, MatchOutcome};
pub use weighted_ap::{accumulate, ap_from_curve, Integration, PrCurve};
