//! Full scale-wise evaluation of a dataset against a filter bank.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{Dataset, Detection, GroundTruthObject, ScaleKind, AREA_NOTE};
use crate::error::{Error, Result};
use crate::filter::{effective_count, EffectiveCount, FilterBank, ScaleFilter};
use crate::fsum::exact_sum;
use crate::matching::{Cell, IouThresholds, MatchResult, DEFAULT_MAX_DETS};
use crate::weighted_ap::{accumulate, ap_from_curve, Integration};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalParams {
    pub thresholds: IouThresholds,
    pub max_dets: usize,
    /// Restrict to these category ids; `None` evaluates every category.
    pub categories: Option<Vec<u64>>,
    pub integration: Integration,
    /// Worker threads; 0 uses rayon's default.
    pub jobs: usize,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            thresholds: IouThresholds::coco(),
            max_dets: DEFAULT_MAX_DETS,
            categories: None,
            integration: Integration::default(),
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryAp {
    pub category_id: u64,
    /// One AP per IoU threshold; `None` when the category has no weighted ground truth in the band.
    pub per_threshold: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandResult {
    pub label: String,
    /// Mean over thresholds, then over categories with defined values.
    pub ap: Option<f64>,
    pub ap50: Option<f64>,
    pub ap75: Option<f64>,
    pub gt: EffectiveCount,
    pub per_category: Vec<CategoryAp>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub suite: String,
    pub scale_mode: ScaleKind,
    pub max_dets: usize,
    pub iou_thresholds: Vec<f64>,
    pub bands: Vec<BandResult>,
    /// Every scale passes with weight 1.
    pub overall: BandResult,
    pub notes: Vec<String>,
}

impl MetricReport {
    pub fn band(&self, label: &str) -> Option<&BandResult> {
        self.bands.iter().find(|b| b.label == label)
    }
}

pub const OVERALL_LABEL: &str = "all";

/// Cells of one category, in ascending image id order.
struct CategoryCells<'a> {
    category_id: u64,
    cells: Vec<Cell<'a>>,
    /// Non-crowd ground truth of the category.
    gts: Vec<&'a GroundTruthObject>,
}

fn build_cells<'a>(dataset: &'a Dataset, categories: &[u64], max_dets: usize) -> Vec<CategoryCells<'a>> {
    type Key = (u64, u64);
    let mut gt_by: BTreeMap<Key, Vec<&GroundTruthObject>> = BTreeMap::new();
    let mut det_by: BTreeMap<Key, Vec<&Detection>> = BTreeMap::new();
    for g in dataset.annotations() {
        gt_by.entry((g.category_id, g.image_id)).or_default().push(g);
    }
    for d in dataset.detections() {
        det_by.entry((d.category_id, d.image_id)).or_default().push(d);
    }
    let mut keys: Vec<Key> = gt_by.keys().chain(det_by.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();

    let cells: Vec<(Key, Cell)> = keys
        .par_iter()
        .filter(|(c, _)| categories.binary_search(c).is_ok())
        .map(|&key| {
            let gts = gt_by.get(&key).map(Vec::as_slice).unwrap_or_default();
            let dets = det_by.get(&key).map(Vec::as_slice).unwrap_or_default();
            (key, Cell::new(key.1, dets, gts, max_dets))
        })
        .collect();

    let mut out: Vec<CategoryCells> = categories
        .iter()
        .map(|&category_id| CategoryCells {
            category_id,
            cells: Vec::new(),
            gts: Vec::new(),
        })
        .collect();
    for ((cat, _), cell) in cells {
        let slot = &mut out[categories.binary_search(&cat).expect("filtered above")];
        slot.gts.extend(cell.gts.iter().filter(|g| !g.iscrowd).copied());
        slot.cells.push(cell);
    }
    out
}

/// Matches every cell of a category at every threshold for one filter.
fn match_category(cat: &CategoryCells, filter: &ScaleFilter, thresholds: &IouThresholds) -> Vec<MatchResult> {
    let weights: Vec<(Vec<f64>, Vec<f64>)> = cat
        .cells
        .iter()
        .map(|cell| {
            let gw = cell.gts.iter().map(|g| filter.membership(g.scale.value)).collect();
            let dw = cell.dets.iter().map(|d| filter.membership(d.scale.value)).collect();
            (gw, dw)
        })
        .collect();
    let gt_weight = exact_sum(cat.gts.iter().map(|g| filter.membership(g.scale.value)));
    let n_dets: usize = cat.cells.iter().map(|c| c.dets.len()).sum();
    thresholds
        .values()
        .iter()
        .map(|&t| {
            let mut records = Vec::with_capacity(n_dets);
            for (cell, (gw, dw)) in cat.cells.iter().zip(&weights) {
                cell.assign(t, gw, dw, &mut records);
            }
            MatchResult {
                category_id: cat.category_id,
                threshold: t,
                records,
                gt_weight,
            }
        })
        .collect()
}

fn category_ap(cat: &CategoryCells, filter: &ScaleFilter, params: &EvalParams) -> CategoryAp {
    let results = match_category(cat, filter, &params.thresholds);
    let per_threshold: Result<Vec<f64>> = results
        .iter()
        .map(|m| accumulate(&m.records, m.gt_weight).map(|c| ap_from_curve(&c, params.integration)))
        .collect();
    CategoryAp {
        category_id: cat.category_id,
        per_threshold: per_threshold.ok(),
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn summarize(label: &str, per_category: Vec<CategoryAp>, gt: EffectiveCount, thresholds: &IouThresholds) -> BandResult {
    let defined = || per_category.iter().filter_map(|c| c.per_threshold.as_deref());
    let at = |t: f64| thresholds.index_of(t).and_then(|i| mean(defined().map(|v| v[i])));
    BandResult {
        label: label.to_string(),
        ap: mean(defined().map(|v| v.iter().sum::<f64>() / v.len() as f64)),
        ap50: at(0.5),
        ap75: at(0.75),
        gt,
        per_category,
    }
}

fn resolve_categories(dataset: &Dataset, wanted: Option<&[u64]>) -> Result<Vec<u64>> {
    let mut all: Vec<u64> = dataset.categories().iter().map(|c| c.id).collect();
    all.sort_unstable();
    let Some(wanted) = wanted else {
        return Ok(all);
    };
    let mut out = Vec::with_capacity(wanted.len());
    for id in wanted {
        if all.binary_search(id).is_err() {
            return Err(Error::Value(format!("unknown category id {id}")));
        }
        out.push(*id);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn run_in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Value(format!("cannot start {jobs} worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// Evaluates every band of `bank` plus an all-scales summary.
///
/// Cells run in parallel, but each (band, category, threshold) is accumulated
/// sequentially and results are assembled in a fixed order, so output does not
/// depend on `params.jobs`.
pub fn evaluate_suite(dataset: &Dataset, bank: &FilterBank, params: &EvalParams) -> Result<MetricReport> {
    if params.max_dets == 0 {
        return Err(Error::Value("max_dets must be at least 1".into()));
    }
    let categories = resolve_categories(dataset, params.categories.as_deref())?;
    run_in_pool(params.jobs, || {
        let cats = build_cells(dataset, &categories, params.max_dets);
        let overall_filter = ScaleFilter::all_pass(OVERALL_LABEL);
        let filters: Vec<&ScaleFilter> = bank.filters().iter().chain([&overall_filter]).collect();

        let jobs: Vec<(usize, usize)> = (0..filters.len())
            .flat_map(|f| (0..cats.len()).map(move |c| (f, c)))
            .collect();
        let aps: Vec<CategoryAp> = jobs
            .par_iter()
            .map(|&(f, c)| category_ap(&cats[c], filters[f], params))
            .collect();

        let mut aps = aps.into_iter();
        let mut bands: Vec<BandResult> = filters
            .iter()
            .map(|filter| {
                let per_category: Vec<CategoryAp> = aps.by_ref().take(cats.len()).collect();
                let gt = effective_count(filter, cats.iter().flat_map(|c| c.gts.iter().map(|g| g.scale.value)));
                summarize(filter.label(), per_category, gt, &params.thresholds)
            })
            .collect();
        let overall = bands.pop().expect("overall band present");

        MetricReport {
            suite: bank.name().to_string(),
            scale_mode: dataset.scale_mode().kind(),
            max_dets: params.max_dets,
            iou_thresholds: params.thresholds.values().to_vec(),
            bands,
            overall,
            notes: vec![AREA_NOTE.to_string()],
        }
    })
}
