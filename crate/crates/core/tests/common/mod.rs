//! Shared helpers for integration tests: a brute-force reference evaluator and
//! random instance generators.

#![allow(dead_code)]

use bandap::data::{AnnotationInput, Category, DetectionInput, Image};
use bandap::{BoundingBox, Dataset, FilterBank, ScaleFilter, ScaleMode};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Membership recomputed from the filter parameters with natural logs.
pub fn naive_membership(f: &ScaleFilter, x: f64) -> f64 {
    let (a, b, c, d) = f.params();
    if x < a || x > d || x.is_nan() {
        return 0.0;
    }
    if x == a && f.lower_open() {
        return 0.0;
    }
    if x >= b && x <= c {
        return 1.0;
    }
    if x < b {
        (x.ln() - a.ln()) / (b.ln() - a.ln())
    } else {
        (d.ln() - x.ln()) / (d.ln() - c.ln())
    }
}

fn naive_iou(d: &BoundingBox, g: &BoundingBox, crowd: bool) -> f64 {
    let x1 = d.x.max(g.x);
    let y1 = d.y.max(g.y);
    let x2 = (d.x + d.w).min(g.x + g.w);
    let y2 = (d.y + d.h).min(g.y + g.h);
    let inter = if x2 > x1 && y2 > y1 { (x2 - x1) * (y2 - y1) } else { 0.0 };
    let denom = if crowd {
        d.w * d.h
    } else {
        d.w * d.h + g.w * g.h - inter
    };
    if denom > 0.0 {
        inter / denom
    } else {
        0.0
    }
}

fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleBand {
    pub ap: Option<f64>,
    pub ap50: Option<f64>,
    pub ap75: Option<f64>,
}

enum Hit {
    Tp(f64),
    Fp(f64),
    Skip,
}

/// AP of one (filter, category, threshold) with exact rational accumulation.
/// Returns `None` when the category has no weighted ground truth.
fn naive_ap(ds: &Dataset, f: &ScaleFilter, cat: u64, thr: f64, max_dets: usize) -> Option<BigRational> {
    let thr = thr.min(1.0 - 1e-10);
    let mut total = BigRational::zero();
    for g in ds.annotations() {
        if g.category_id == cat && !g.iscrowd {
            total += rat(naive_membership(f, (g.bbox.w * g.bbox.h).sqrt()));
        }
    }
    if total.is_zero() {
        return None;
    }

    let mut images: Vec<u64> = ds.images().iter().map(|i| i.id).collect();
    images.sort();
    let mut ranked: Vec<(f64, Hit)> = Vec::new();
    for img in images {
        let mut dets: Vec<_> = ds
            .detections()
            .iter()
            .filter(|d| d.image_id == img && d.category_id == cat)
            .collect();
        dets.sort_by(|p, q| q.score.partial_cmp(&p.score).unwrap().then(p.id.cmp(&q.id)));
        dets.truncate(max_dets);
        let mut gts: Vec<_> = ds
            .annotations()
            .iter()
            .filter(|g| g.image_id == img && g.category_id == cat)
            .collect();
        gts.sort_by_key(|g| g.id);
        let weight = |g: &bandap::GroundTruthObject| naive_membership(f, (g.bbox.w * g.bbox.h).sqrt());
        let mut used = vec![false; gts.len()];
        for d in dets {
            let mut best_real: Option<(usize, f64)> = None;
            let mut best_ignored: Option<(usize, f64)> = None;
            for (j, g) in gts.iter().enumerate() {
                if used[j] && !g.iscrowd {
                    continue;
                }
                let v = naive_iou(&d.bbox, &g.bbox, g.iscrowd);
                if v < thr {
                    continue;
                }
                let slot = if !g.iscrowd && weight(g) > 0.0 {
                    &mut best_real
                } else {
                    &mut best_ignored
                };
                if slot.is_none_or(|(_, b)| v > b) {
                    *slot = Some((j, v));
                }
            }
            let hit = if let Some((j, _)) = best_real {
                used[j] = true;
                Hit::Tp(weight(gts[j]))
            } else if let Some((j, _)) = best_ignored {
                used[j] = true;
                Hit::Skip
            } else {
                Hit::Fp(naive_membership(f, (d.bbox.w * d.bbox.h).sqrt()))
            };
            ranked.push((d.score, hit));
        }
    }
    // stable: equal scores keep image order
    ranked.sort_by(|p, q| q.0.partial_cmp(&p.0).unwrap());

    let mut tp = BigRational::zero();
    let mut fp = BigRational::zero();
    let mut pts: Vec<(BigRational, BigRational)> = Vec::new();
    for (_, hit) in ranked {
        match hit {
            Hit::Tp(w) => tp += rat(w),
            Hit::Fp(w) => fp += rat(w),
            Hit::Skip => continue,
        }
        let seen = &tp + &fp;
        if !seen.is_zero() {
            pts.push((&tp / &total, &tp / seen));
        }
    }
    // suffix maximum of precision, then the first point reaching each grid recall
    let mut env: Vec<BigRational> = pts.iter().map(|(_, p)| p.clone()).collect();
    for i in (0..env.len().saturating_sub(1)).rev() {
        if env[i + 1] > env[i] {
            env[i] = env[i + 1].clone();
        }
    }
    let mut sum = BigRational::zero();
    for i in 0..=100 {
        let r = BigRational::new(BigInt::from(i), BigInt::from(100));
        if let Some(k) = pts.iter().position(|(rec, _)| *rec >= r) {
            sum += &env[k];
        }
    }
    Some(sum / BigRational::from_integer(BigInt::from(101)))
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Brute-force evaluation of one filter at IoU 0.50:0.05:0.95.
pub fn oracle_band(ds: &Dataset, f: &ScaleFilter, max_dets: usize) -> OracleBand {
    let thresholds: Vec<f64> = (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect();
    let mut cats: Vec<u64> = ds.categories().iter().map(|c| c.id).collect();
    cats.sort();
    let mut per_cat_mean = Vec::new();
    let mut per_cat_50 = Vec::new();
    let mut per_cat_75 = Vec::new();
    for cat in cats {
        let aps: Option<Vec<f64>> = thresholds
            .iter()
            .map(|&t| naive_ap(ds, f, cat, t, max_dets).map(|a| a.to_f64().unwrap()))
            .collect();
        if let Some(aps) = aps {
            per_cat_mean.push(aps.iter().sum::<f64>() / aps.len() as f64);
            per_cat_50.push(aps[0]);
            per_cat_75.push(aps[5]);
        }
    }
    OracleBand {
        ap: mean(&per_cat_mean),
        ap50: mean(&per_cat_50),
        ap75: mean(&per_cat_75),
    }
}

pub fn oracle_bank(ds: &Dataset, bank: &FilterBank, max_dets: usize) -> Vec<OracleBand> {
    bank.filters().iter().map(|f| oracle_band(ds, f, max_dets)).collect()
}

pub fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => (x - y).abs() <= tol,
        _ => false,
    }
}

/// Largest |difference| between two optional values; infinite when only one is defined.
pub fn gap(a: Option<f64>, b: Option<f64>) -> f64 {
    match (a, b) {
        (None, None) => 0.0,
        (Some(x), Some(y)) => (x - y).abs(),
        _ => f64::INFINITY,
    }
}

/// Small random instance: at most 5 images, 12 ground-truth objects, 20
/// detections and 3 categories. Detections are mostly perturbed copies of
/// ground truth so every IoU level sees both hits and misses.
pub fn random_instance(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_images = rng.gen_range(1..=5);
    let n_cats = rng.gen_range(1..=3);
    let images: Vec<Image> = (1..=n_images)
        .map(|id| Image {
            id,
            width: 2048.0,
            height: 2048.0,
        })
        .collect();
    let categories: Vec<Category> = (1..=n_cats)
        .map(|id| Category {
            id,
            name: format!("c{id}"),
        })
        .collect();

    let random_box = |rng: &mut ChaCha8Rng| {
        let side = 2f64.powf(rng.gen_range(0.5..10.5)).round().max(1.0);
        let aspect = 2f64.powf(rng.gen_range(-1.0..1.0));
        let w = (side * aspect).round().clamp(1.0, 1800.0);
        let h = (side / aspect).round().clamp(1.0, 1800.0);
        let x = rng.gen_range(0.0..(2048.0 - w)).round();
        let y = rng.gen_range(0.0..(2048.0 - h)).round();
        BoundingBox::new(x, y, w, h).unwrap()
    };

    let n_gt = rng.gen_range(0..=12);
    let mut annotations = Vec::with_capacity(n_gt);
    for id in 1..=n_gt as u64 {
        annotations.push(AnnotationInput {
            id,
            image_id: rng.gen_range(1..=n_images),
            category_id: rng.gen_range(1..=n_cats),
            bbox: random_box(&mut rng),
            iscrowd: rng.gen_bool(0.1),
        });
    }

    let n_det = rng.gen_range(0..=20);
    let mut detections = Vec::with_capacity(n_det);
    for _ in 0..n_det {
        let copy = !annotations.is_empty() && rng.gen_bool(0.7);
        let (image_id, category_id, bbox) = if copy {
            let g = &annotations[rng.gen_range(0..annotations.len())];
            let b = g.bbox;
            let j = |rng: &mut ChaCha8Rng, s: f64| (s * rng.gen_range(-0.15..0.15)).round();
            let w = (b.w + j(&mut rng, b.w)).max(1.0);
            let h = (b.h + j(&mut rng, b.h)).max(1.0);
            let bbox = BoundingBox::new(b.x + j(&mut rng, b.w), b.y + j(&mut rng, b.h), w, h).unwrap();
            let cat = if rng.gen_bool(0.9) {
                g.category_id
            } else {
                rng.gen_range(1..=n_cats)
            };
            (g.image_id, cat, bbox)
        } else {
            (
                rng.gen_range(1..=n_images),
                rng.gen_range(1..=n_cats),
                random_box(&mut rng),
            )
        };
        detections.push(DetectionInput {
            image_id,
            category_id,
            bbox,
            // coarse scores so ties across and within images occur
            score: rng.gen_range(1..=20) as f64 / 20.0,
        });
    }

    Dataset::build(images, categories, annotations, ScaleMode::Absolute)
        .unwrap()
        .with_detections(detections)
        .unwrap()
}
