//! Image-level bootstrap of per-band AP, for comparing how stable different banks are.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{AnnotationInput, Dataset, DetectionInput, Image};
use crate::error::{Error, Result};
use crate::evaluate::{evaluate_suite, EvalParams, MetricReport};
use crate::filter::FilterBank;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandBootstrap {
    pub label: String,
    /// Over resamples where the band is defined.
    pub ap_mean: Option<f64>,
    pub ap_std: Option<f64>,
    pub undefined_fraction: f64,
    pub gt_nonzero_mean: f64,
    #[serde(skip)]
    pub gt_nonzero_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapResult {
    pub bank: String,
    #[serde(rename = "B")]
    pub resamples: usize,
    pub bands: Vec<BandBootstrap>,
}

impl BootstrapResult {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bootstrap result serializes");
        s.push('\n');
        s
    }
}

/// Image indices drawn with replacement for resample `index`.
pub fn resample_indices(n_images: usize, seed: u64, index: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    (0..n_images).map(|_| rng.gen_range(0..n_images)).collect()
}

/// Builds a dataset from the given images, renumbering duplicates so every
/// drawn copy is a distinct image.
pub fn resample(dataset: &Dataset, indices: &[usize]) -> Result<Dataset> {
    let src_images = dataset.images();
    let mut by_image: std::collections::HashMap<u64, (Vec<usize>, Vec<usize>)> = Default::default();
    for (k, a) in dataset.annotations().iter().enumerate() {
        by_image.entry(a.image_id).or_default().0.push(k);
    }
    for (k, d) in dataset.detections().iter().enumerate() {
        by_image.entry(d.image_id).or_default().1.push(k);
    }

    let mut images = Vec::with_capacity(indices.len());
    let mut annotations = Vec::new();
    let mut detections = Vec::new();
    for (new_idx, &src) in indices.iter().enumerate() {
        let img = src_images
            .get(src)
            .ok_or_else(|| Error::Value(format!("resample index {src} out of range")))?;
        let new_id = new_idx as u64 + 1;
        images.push(Image {
            id: new_id,
            width: img.width,
            height: img.height,
        });
        let Some((gts, dets)) = by_image.get(&img.id) else {
            continue;
        };
        for &k in gts {
            let a = &dataset.annotations()[k];
            annotations.push(AnnotationInput {
                id: annotations.len() as u64 + 1,
                image_id: new_id,
                category_id: a.category_id,
                bbox: a.bbox,
                iscrowd: a.iscrowd,
            });
        }
        for &k in dets {
            let d = &dataset.detections()[k];
            detections.push(DetectionInput {
                image_id: new_id,
                category_id: d.category_id,
                bbox: d.bbox,
                score: d.score,
            });
        }
    }
    Dataset::build(images, dataset.categories().to_vec(), annotations, dataset.scale_mode())?
        .with_detections(detections)
}

fn summarize(bank: &FilterBank, reports: &[MetricReport]) -> BootstrapResult {
    let b = reports.len();
    let bands = bank
        .filters()
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let aps: Vec<f64> = reports.iter().filter_map(|r| r.bands[i].ap).collect();
            let counts: Vec<usize> = reports.iter().map(|r| r.bands[i].gt.nonzero_count).collect();
            let ap_mean = (!aps.is_empty()).then(|| aps.iter().sum::<f64>() / aps.len() as f64);
            let ap_std = ap_mean.map(|m| {
                if aps.len() < 2 {
                    0.0
                } else {
                    (aps.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (aps.len() - 1) as f64).sqrt()
                }
            });
            BandBootstrap {
                label: f.label().to_string(),
                ap_mean,
                ap_std,
                undefined_fraction: (b - aps.len()) as f64 / b as f64,
                gt_nonzero_mean: counts.iter().sum::<usize>() as f64 / b as f64,
                gt_nonzero_counts: counts,
            }
        })
        .collect();
    BootstrapResult {
        bank: bank.name().to_string(),
        resamples: b,
        bands,
    }
}

/// Evaluates every bank on `resamples` image-level bootstrap resamples.
/// Resample `r` depends only on `(seed, r)`, so parallel scheduling cannot change results.
pub fn bootstrap_compare(
    dataset: &Dataset,
    banks: &[FilterBank],
    resamples: usize,
    seed: u64,
    params: &EvalParams,
) -> Result<Vec<BootstrapResult>> {
    if resamples < 2 {
        return Err(Error::Value(format!("need at least 2 resamples, got {resamples}")));
    }
    if dataset.images().is_empty() {
        return Err(Error::Value("dataset has no images to resample".into()));
    }
    let inner = EvalParams {
        jobs: 0,
        ..params.clone()
    };
    let work = || -> Result<Vec<Vec<MetricReport>>> {
        (0..resamples)
            .into_par_iter()
            .map(|r| {
                let ds = resample(dataset, &resample_indices(dataset.images().len(), seed, r))?;
                banks.iter().map(|bank| evaluate_suite(&ds, bank, &inner)).collect()
            })
            .collect()
    };
    let per_resample = if params.jobs == 0 {
        work()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(params.jobs)
            .build()
            .map_err(|e| Error::Value(format!("cannot start worker threads: {e}")))?
            .install(work)?
    };
    Ok(banks
        .iter()
        .enumerate()
        .map(|(k, bank)| {
            let reports: Vec<MetricReport> = per_resample.iter().map(|rs| rs[k].clone()).collect();
            summarize(bank, &reports)
        })
        .collect())
}
