//! Synthetic detection scenarios with controlled scale distributions and a
//! simple detector error model.
//!
//! Randomness comes from ChaCha8 with one stream per (image, purpose), so each
//! stage draws from its own sequence: changing the false-positive rate leaves
//! the ground truth and true-positive draws untouched.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{AnnotationInput, BoundingBox, Category, Dataset, DetectionInput, Image, ScaleMode};
use crate::error::{Error, Result};
use crate::matching::iou;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mu_log2: f64,
    pub sigma_log2: f64,
}

/// Distributions over absolute object scale in pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScaleDistribution {
    /// `log2(scale) ~ N(mu_log2, sigma_log2²)`.
    LogNormal {
        mu_log2: f64,
        sigma_log2: f64,
    },
    LogUniform {
        lo: f64,
        hi: f64,
    },
    /// Mixture of log-normals, typically heavy on small scales.
    SmallSkewed {
        components: Vec<MixtureComponent>,
    },
}

impl ScaleDistribution {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Value(format!("scale distribution: {m}")));
        match self {
            ScaleDistribution::LogNormal { mu_log2, sigma_log2 } => {
                if !(mu_log2.is_finite() && sigma_log2.is_finite() && *sigma_log2 >= 0.0) {
                    return bad("log-normal needs finite mu and sigma >= 0");
                }
            }
            ScaleDistribution::LogUniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && *lo > 0.0 && lo < hi) {
                    return bad("log-uniform needs 0 < lo < hi");
                }
            }
            ScaleDistribution::SmallSkewed { components } => {
                if components.is_empty() {
                    return bad("mixture needs at least one component");
                }
                for c in components {
                    if !(c.weight >= 0.0 && c.weight.is_finite() && c.mu_log2.is_finite() && c.sigma_log2 >= 0.0) {
                        return bad("mixture weights and sigmas must be non-negative");
                    }
                }
                if !(components.iter().map(|c| c.weight).sum::<f64>() > 0.0) {
                    return bad("mixture weights must not all be zero");
                }
            }
        }
        Ok(())
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            ScaleDistribution::LogNormal { mu_log2, sigma_log2 } => {
                let z: f64 = rng.sample(StandardNormal);
                (mu_log2 + sigma_log2 * z).exp2()
            }
            ScaleDistribution::LogUniform { lo, hi } => {
                let u: f64 = rng.gen();
                (lo.log2() + u * (hi.log2() - lo.log2())).exp2()
            }
            ScaleDistribution::SmallSkewed { components } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                let mut u: f64 = rng.gen::<f64>() * total;
                let z: f64 = rng.sample(StandardNormal);
                let mut pick = components.last().expect("validated non-empty");
                for c in components {
                    if u < c.weight {
                        pick = c;
                        break;
                    }
                    u -= c.weight;
                }
                (pick.mu_log2 + pick.sigma_log2 * z).exp2()
            }
        }
    }
}

/// Detection probability as a function of scale: linear in `log2(scale)`
/// between knots, constant beyond the ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallCurve {
    /// `(scale, recall)` pairs with strictly increasing scales.
    pub knots: Vec<(f64, f64)>,
}

impl RecallCurve {
    pub fn constant(recall: f64) -> Self {
        RecallCurve {
            knots: vec![(1.0, recall)],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.knots.is_empty() {
            return Err(Error::Value("recall curve needs at least one knot".into()));
        }
        if self
            .knots
            .iter()
            .any(|&(s, r)| !(s > 0.0 && s.is_finite() && (0.0..=1.0).contains(&r)))
        {
            return Err(Error::Value("recall knots need scale > 0 and recall in [0, 1]".into()));
        }
        if self.knots.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::Value("recall knot scales must increase".into()));
        }
        Ok(())
    }

    pub fn at(&self, scale: f64) -> f64 {
        let k = &self.knots;
        let first = k[0];
        let last = k[k.len() - 1];
        if scale <= first.0 {
            return first.1;
        }
        if scale >= last.0 {
            return last.1;
        }
        let i = k.partition_point(|&(s, _)| s <= scale);
        let (s0, r0) = k[i - 1];
        let (s1, r1) = k[i];
        let t = (scale.log2() - s0.log2()) / (s1.log2() - s0.log2());
        r0 + t * (r1 - r0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub recall_by_scale: RecallCurve,
    /// Standard deviation of box jitter relative to box size.
    pub localization_noise: f64,
    /// Expected false positives per image.
    pub fp_rate: f64,
    pub fp_scale_distribution: ScaleDistribution,
    /// Half-width of the uniform noise added to scores.
    #[serde(default = "default_score_noise")]
    pub score_noise: f64,
}

fn default_score_noise() -> f64 {
    0.02
}

impl DetectorModel {
    pub fn perfect() -> Self {
        DetectorModel {
            recall_by_scale: RecallCurve::constant(1.0),
            localization_noise: 0.0,
            fp_rate: 0.0,
            fp_scale_distribution: ScaleDistribution::LogUniform { lo: 4.0, hi: 256.0 },
            score_noise: default_score_noise(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_images: usize,
    pub image_width: f64,
    pub image_height: f64,
    /// Objects per image ~ Poisson(mean), capped at `objects_max`.
    pub objects_mean: f64,
    pub objects_max: usize,
    pub n_categories: usize,
    pub scale_distribution: ScaleDistribution,
    /// Sampled scales are redrawn until they fall inside this range.
    pub scale_range: (f64, f64),
    /// Aspect ratios are log-uniform in `[1/r, r]`.
    pub max_aspect_ratio: f64,
    pub detector: DetectorModel,
    pub seed: u64,
}

const MAX_POISSON_MEAN: f64 = 500.0;
const FP_MAX_GT_IOU: f64 = 0.1;
const PLACEMENT_ATTEMPTS: usize = 50;

impl SynthConfig {
    /// Many tiny objects and few large ones, at 4K resolution.
    pub fn small_skewed(seed: u64) -> Self {
        SynthConfig {
            n_images: 200,
            image_width: 3840.0,
            image_height: 2160.0,
            objects_mean: 12.0,
            objects_max: 100,
            n_categories: 1,
            scale_distribution: ScaleDistribution::SmallSkewed {
                components: vec![
                    MixtureComponent {
                        weight: 0.80,
                        mu_log2: 3.3,
                        sigma_log2: 0.7,
                    },
                    MixtureComponent {
                        weight: 0.17,
                        mu_log2: 5.3,
                        sigma_log2: 0.8,
                    },
                    MixtureComponent {
                        weight: 0.03,
                        mu_log2: 8.0,
                        sigma_log2: 1.0,
                    },
                ],
            },
            scale_range: (3.0, 1500.0),
            max_aspect_ratio: 2.0,
            detector: DetectorModel {
                recall_by_scale: RecallCurve {
                    knots: vec![(4.0, 0.35), (16.0, 0.8), (64.0, 0.95)],
                },
                localization_noise: 0.08,
                fp_rate: 3.0,
                fp_scale_distribution: ScaleDistribution::LogUniform { lo: 4.0, hi: 256.0 },
                score_noise: default_score_noise(),
            },
            seed,
        }
    }

    /// COCO-like log-normal scales.
    pub fn log_normal(seed: u64) -> Self {
        SynthConfig {
            n_images: 100,
            image_width: 640.0,
            image_height: 480.0,
            objects_mean: 7.0,
            objects_max: 100,
            n_categories: 3,
            scale_distribution: ScaleDistribution::LogNormal {
                mu_log2: 5.7,
                sigma_log2: 1.5,
            },
            scale_range: (2.0, 400.0),
            max_aspect_ratio: 2.0,
            detector: DetectorModel {
                recall_by_scale: RecallCurve {
                    knots: vec![(8.0, 0.4), (32.0, 0.8), (128.0, 0.95)],
                },
                localization_noise: 0.06,
                fp_rate: 2.0,
                fp_scale_distribution: ScaleDistribution::LogUniform { lo: 4.0, hi: 300.0 },
                score_noise: default_score_noise(),
            },
            seed,
        }
    }

    pub fn log_uniform(seed: u64) -> Self {
        SynthConfig {
            scale_distribution: ScaleDistribution::LogUniform { lo: 2.0, hi: 2048.0 },
            scale_range: (2.0, 2048.0),
            image_width: 3840.0,
            image_height: 2160.0,
            ..Self::log_normal(seed)
        }
    }

    pub fn preset(name: &str, seed: u64) -> Option<Self> {
        match name {
            "small_skewed" => Some(Self::small_skewed(seed)),
            "log_normal" => Some(Self::log_normal(seed)),
            "log_uniform" => Some(Self::log_uniform(seed)),
            "perfect" => Some(SynthConfig {
                detector: DetectorModel::perfect(),
                ..Self::log_normal(seed)
            }),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Value(m));
        if self.n_images == 0 {
            return bad("n_images must be at least 1".into());
        }
        if !(self.image_width > 0.0
            && self.image_height > 0.0
            && self.image_width.is_finite()
            && self.image_height.is_finite())
        {
            return bad("image size must be positive".into());
        }
        if !(self.objects_mean >= 0.0 && self.objects_mean <= MAX_POISSON_MEAN) {
            return bad(format!("objects_mean must lie in [0, {MAX_POISSON_MEAN}]"));
        }
        if self.n_categories == 0 {
            return bad("n_categories must be at least 1".into());
        }
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return bad("scale_range needs 0 < lo < hi".into());
        }
        if !(self.max_aspect_ratio >= 1.0 && self.max_aspect_ratio.is_finite()) {
            return bad("max_aspect_ratio must be >= 1".into());
        }
        self.scale_distribution.validate()?;
        let d = &self.detector;
        d.recall_by_scale.validate()?;
        d.fp_scale_distribution.validate()?;
        if !(d.localization_noise >= 0.0 && d.localization_noise.is_finite()) {
            return bad("localization_noise must be >= 0".into());
        }
        if !(d.fp_rate >= 0.0 && d.fp_rate <= MAX_POISSON_MEAN) {
            return bad(format!("fp_rate must lie in [0, {MAX_POISSON_MEAN}]"));
        }
        if !(d.score_noise >= 0.0 && d.score_noise.is_finite()) {
            return bad("score_noise must be >= 0".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
#[repr(u64)]
enum Purpose {
    ObjectCount = 0,
    Objects = 1,
    Detections = 2,
    FpCount = 3,
    FpBoxes = 4,
}

fn stream(seed: u64, image_index: usize, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((image_index as u64) << 3) | purpose as u64);
    rng
}

/// Inverse-CDF Poisson draw. For a fixed `u` the count is non-decreasing in `mean`.
fn poisson_from_uniform(u: f64, mean: f64) -> usize {
    let mut k = 0usize;
    let mut p = (-mean).exp();
    let mut cdf = p;
    while u > cdf && k < 10_000 {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
        if p == 0.0 && k as f64 > mean {
            break;
        }
    }
    k
}

fn sample_scale<R: Rng>(dist: &ScaleDistribution, range: (f64, f64), rng: &mut R) -> f64 {
    for _ in 0..1000 {
        let s = dist.sample(rng);
        if s >= range.0 && s <= range.1 {
            return s;
        }
    }
    dist.sample(rng).clamp(range.0, range.1)
}

fn sample_box<R: Rng>(cfg: &SynthConfig, dist: &ScaleDistribution, rng: &mut R) -> BoundingBox {
    let s = sample_scale(dist, cfg.scale_range, rng);
    let lr = cfg.max_aspect_ratio.log2();
    let ar = (rng.gen::<f64>() * 2.0 * lr - lr).exp2();
    let w = (s * ar.sqrt()).min(cfg.image_width);
    let h = (s / ar.sqrt()).min(cfg.image_height);
    let x = rng.gen::<f64>() * (cfg.image_width - w);
    let y = rng.gen::<f64>() * (cfg.image_height - h);
    BoundingBox { x, y, w, h }
}

/// Generates ground truth and detections. Output depends only on `config`.
pub fn generate(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let cfg = config;
    let images: Vec<Image> = (0..cfg.n_images)
        .map(|i| Image {
            id: i as u64 + 1,
            width: cfg.image_width,
            height: cfg.image_height,
        })
        .collect();
    let categories: Vec<Category> = (0..cfg.n_categories)
        .map(|c| Category {
            id: c as u64 + 1,
            name: format!("class{}", c + 1),
        })
        .collect();

    let mut annotations = Vec::new();
    let mut detections = Vec::new();
    let det = &cfg.detector;
    let sigma = det.localization_noise;
    for (i, img) in images.iter().enumerate() {
        let n = {
            let mut rng = stream(cfg.seed, i, Purpose::ObjectCount);
            poisson_from_uniform(rng.gen(), cfg.objects_mean).min(cfg.objects_max)
        };
        let mut rng = stream(cfg.seed, i, Purpose::Objects);
        let first = annotations.len();
        for _ in 0..n {
            let bbox = sample_box(cfg, &cfg.scale_distribution, &mut rng);
            let category_id = rng.gen_range(0..cfg.n_categories) as u64 + 1;
            annotations.push(AnnotationInput {
                id: annotations.len() as u64 + 1,
                image_id: img.id,
                category_id,
                bbox,
                iscrowd: false,
            });
        }

        let mut rng = stream(cfg.seed, i, Purpose::Detections);
        for a in &annotations[first..] {
            // fixed number of draws per object keeps the stream aligned
            let u: f64 = rng.gen();
            let z: [f64; 4] = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            let v: f64 = rng.gen();
            if u >= det.recall_by_scale.at(a.bbox.area().sqrt()) {
                continue;
            }
            let b = a.bbox;
            let w = b.w * (sigma * z[2]).exp();
            let h = b.h * (sigma * z[3]).exp();
            let cx = b.x + b.w / 2.0 + sigma * z[0] * b.w;
            let cy = b.y + b.h / 2.0 + sigma * z[1] * b.h;
            let jitter = sigma * (z.iter().map(|t| t * t).sum::<f64>() / 4.0).sqrt();
            let score = (1.0 - jitter + det.score_noise * (2.0 * v - 1.0)).clamp(0.0, 1.0);
            detections.push(DetectionInput {
                image_id: img.id,
                category_id: a.category_id,
                bbox: BoundingBox {
                    x: cx - w / 2.0,
                    y: cy - h / 2.0,
                    w,
                    h,
                },
                score,
            });
        }

        let n_fp = {
            let mut rng = stream(cfg.seed, i, Purpose::FpCount);
            poisson_from_uniform(rng.gen(), det.fp_rate)
        };
        let mut rng = stream(cfg.seed, i, Purpose::FpBoxes);
        for _ in 0..n_fp {
            let category_id = rng.gen_range(0..cfg.n_categories) as u64 + 1;
            let score: f64 = rng.gen();
            // background boxes: keep clear of same-category ground truth
            for _ in 0..PLACEMENT_ATTEMPTS {
                let bbox = sample_box(cfg, &det.fp_scale_distribution, &mut rng);
                let clear = annotations[first..]
                    .iter()
                    .filter(|a| a.category_id == category_id)
                    .all(|a| iou(&a.bbox, &bbox) < FP_MAX_GT_IOU);
                if clear {
                    detections.push(DetectionInput {
                        image_id: img.id,
                        category_id,
                        bbox,
                        score,
                    });
                    break;
                }
            }
        }
    }

    Dataset::build(images, categories, annotations, ScaleMode::Absolute)?.with_detections(detections)
}
