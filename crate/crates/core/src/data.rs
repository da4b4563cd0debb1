//! COCO-format ground truth and detection results, parsed into validated records.
//!
//! Every record carries a derived scale value. The `area` field of annotations is
//! never trusted: scales always come from the bbox width and height.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Note attached to every report produced from loaded files.
pub const AREA_NOTE: &str = "object scale is sqrt(w*h) of the bbox; annotation `area` fields are ignored";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let b = BoundingBox { x, y, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite()) {
            return Err(Error::Value(format!("non-finite bbox {:?}", self.to_xywh())));
        }
        if self.w < 0.0 || self.h < 0.0 {
            return Err(Error::Value(format!("negative bbox size {:?}", self.to_xywh())));
        }
        Ok(())
    }

    pub fn to_xywh(&self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleKind {
    Absolute,
    Relative,
}

impl fmt::Display for ScaleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScaleKind::Absolute => "absolute",
            ScaleKind::Relative => "relative",
        })
    }
}

/// How object scale is derived from a box.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ScaleMode {
    /// `sqrt(w * h)` in pixels.
    #[default]
    Absolute,
    /// `sqrt(w * h) / sqrt(W * H) * reference_resolution`.
    Relative { reference_resolution: f64 },
}

impl ScaleMode {
    pub fn relative() -> Self {
        ScaleMode::Relative {
            reference_resolution: 1.0,
        }
    }

    pub fn kind(&self) -> ScaleKind {
        match self {
            ScaleMode::Absolute => ScaleKind::Absolute,
            ScaleMode::Relative { .. } => ScaleKind::Relative,
        }
    }

    fn validate(&self) -> Result<()> {
        if let ScaleMode::Relative { reference_resolution } = *self {
            if !(reference_resolution.is_finite() && reference_resolution > 0.0) {
                return Err(Error::Value(format!(
                    "reference resolution must be positive, got {reference_resolution}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleValue {
    pub value: f64,
    pub kind: ScaleKind,
}

/// Derives the scale of `bbox` inside an image of `image_dims = (W, H)`.
pub fn compute_scale(bbox: &BoundingBox, image_dims: (f64, f64), mode: ScaleMode) -> Result<ScaleValue> {
    bbox.validate()?;
    mode.validate()?;
    let absolute = bbox.area().sqrt();
    let value = match mode {
        ScaleMode::Absolute => absolute,
        ScaleMode::Relative { reference_resolution } => {
            let (w, h) = image_dims;
            if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
                return Err(Error::Value(format!(
                    "relative scale needs positive image size, got {w}x{h}"
                )));
            }
            absolute / (w * h).sqrt() * reference_resolution
        }
    };
    Ok(ScaleValue {
        value,
        kind: mode.kind(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub id: u64,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Category {
    pub id: u64,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthObject {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: BoundingBox,
    pub scale: ScaleValue,
    pub iscrowd: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// Position in the source file; breaks score ties.
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: BoundingBox,
    pub score: f64,
    pub scale: ScaleValue,
}

/// Image and category tables plus ground-truth annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    images: Vec<Image>,
    categories: Vec<Category>,
    annotations: Vec<GroundTruthObject>,
    scale_mode: ScaleMode,
    image_index: HashMap<u64, usize>,
}

impl GroundTruth {
    pub fn images(&self) -> &[Image] {
        &self.images
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn annotations(&self) -> &[GroundTruthObject] {
        &self.annotations
    }

    pub fn scale_mode(&self) -> ScaleMode {
        self.scale_mode
    }

    pub fn image(&self, id: u64) -> Option<&Image> {
        self.image_index.get(&id).map(|&i| &self.images[i])
    }

    fn has_category(&self, id: u64) -> bool {
        self.categories.iter().any(|c| c.id == id)
    }
}

/// Ground truth plus an optional set of detections. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    gt: Arc<GroundTruth>,
    detections: Vec<Detection>,
}

/// Raw box input for [`Dataset::build`].
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationInput {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: BoundingBox,
    pub iscrowd: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionInput {
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: BoundingBox,
    pub score: f64,
}

impl Dataset {
    /// Validates tables and derives scales.
    pub fn build(
        images: Vec<Image>,
        categories: Vec<Category>,
        annotations: Vec<AnnotationInput>,
        scale_mode: ScaleMode,
    ) -> Result<Self> {
        scale_mode.validate()?;
        let mut image_index = HashMap::with_capacity(images.len());
        for (i, img) in images.iter().enumerate() {
            if !(img.width.is_finite() && img.height.is_finite()) || img.width < 0.0 || img.height < 0.0 {
                return Err(Error::Value(format!(
                    "image {} has invalid size {}x{}",
                    img.id, img.width, img.height
                )));
            }
            if image_index.insert(img.id, i).is_some() {
                return Err(Error::Referential(format!("duplicate image id {}", img.id)));
            }
        }
        let mut cat_ids = HashSet::with_capacity(categories.len());
        for c in &categories {
            if !cat_ids.insert(c.id) {
                return Err(Error::Referential(format!("duplicate category id {}", c.id)));
            }
        }

        let mut seen = HashSet::with_capacity(annotations.len());
        let mut objects = Vec::with_capacity(annotations.len());
        for a in annotations {
            if !seen.insert(a.id) {
                return Err(Error::Referential(format!("duplicate annotation id {}", a.id)));
            }
            let img = image_index.get(&a.image_id).map(|&i| &images[i]).ok_or_else(|| {
                Error::Referential(format!("annotation {} references unknown image {}", a.id, a.image_id))
            })?;
            if !cat_ids.contains(&a.category_id) {
                return Err(Error::Referential(format!(
                    "annotation {} references unknown category {}",
                    a.id, a.category_id
                )));
            }
            let scale = compute_scale(&a.bbox, (img.width, img.height), scale_mode)
                .map_err(|e| Error::Value(format!("annotation {}: {}", a.id, e.root_message())))?;
            objects.push(GroundTruthObject {
                id: a.id,
                image_id: a.image_id,
                category_id: a.category_id,
                bbox: a.bbox,
                scale,
                iscrowd: a.iscrowd,
            });
        }

        Ok(Dataset {
            gt: Arc::new(GroundTruth {
                images,
                categories,
                annotations: objects,
                scale_mode,
                image_index,
            }),
            detections: Vec::new(),
        })
    }

    /// Returns a dataset sharing this ground truth with `detections` attached
    /// (replacing any already present). Order is preserved.
    pub fn with_detections(&self, detections: Vec<DetectionInput>) -> Result<Self> {
        let gt = &self.gt;
        let mut out = Vec::with_capacity(detections.len());
        for (i, d) in detections.into_iter().enumerate() {
            if !d.score.is_finite() {
                return Err(Error::Value(format!("detection {i} has non-finite score")));
            }
            let img = gt
                .image(d.image_id)
                .ok_or_else(|| Error::Referential(format!("detection {i} references unknown image {}", d.image_id)))?;
            if !gt.has_category(d.category_id) {
                return Err(Error::Referential(format!(
                    "detection {i} references unknown category {}",
                    d.category_id
                )));
            }
            let scale = compute_scale(&d.bbox, (img.width, img.height), gt.scale_mode)
                .map_err(|e| Error::Value(format!("detection {i}: {}", e.root_message())))?;
            out.push(Detection {
                id: i as u64,
                image_id: d.image_id,
                category_id: d.category_id,
                bbox: d.bbox,
                score: d.score,
                scale,
            });
        }
        Ok(Dataset {
            gt: Arc::clone(&self.gt),
            detections: out,
        })
    }

    pub fn ground_truth(&self) -> &GroundTruth {
        &self.gt
    }

    pub fn images(&self) -> &[Image] {
        &self.gt.images
    }

    pub fn categories(&self) -> &[Category] {
        &self.gt.categories
    }

    pub fn annotations(&self) -> &[GroundTruthObject] {
        &self.gt.annotations
    }

    pub fn detections(&self) -> &[Detection] {
        &self.detections
    }

    pub fn scale_mode(&self) -> ScaleMode {
        self.gt.scale_mode
    }

    pub fn from_ground_truth_json(text: &str, scale_mode: ScaleMode) -> Result<Self> {
        let file: CocoGroundTruthFile = parse_json(text)?;
        let images = file
            .images
            .into_iter()
            .map(|i| Image {
                id: i.id,
                width: i.width.0,
                height: i.height.0,
            })
            .collect();
        let categories = file
            .categories
            .into_iter()
            .map(|c| Category { id: c.id, name: c.name })
            .collect();
        let annotations = file
            .annotations
            .into_iter()
            .map(|a| {
                Ok(AnnotationInput {
                    id: a.id,
                    image_id: a.image_id,
                    category_id: a.category_id,
                    bbox: bbox_from_slice(&a.bbox)?,
                    iscrowd: a.iscrowd.map(|c| c.0).unwrap_or(false),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::build(images, categories, annotations, scale_mode)
    }

    pub fn attach_detections_json(&self, text: &str) -> Result<Self> {
        let records: Vec<CocoResult> = parse_json(text)?;
        let inputs = records
            .into_iter()
            .map(|r| {
                Ok(DetectionInput {
                    image_id: r.image_id,
                    category_id: r.category_id,
                    bbox: bbox_from_slice(&r.bbox)?,
                    score: r.score.0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.with_detections(inputs)
    }

    /// COCO annotation JSON for the ground-truth side.
    pub fn ground_truth_to_json(&self) -> String {
        let gt = &self.gt;
        let file = CocoGroundTruthOut {
            images: gt
                .images
                .iter()
                .map(|i| CocoImageOut {
                    id: i.id,
                    width: JsonNumberOut(i.width),
                    height: JsonNumberOut(i.height),
                })
                .collect(),
            annotations: gt
                .annotations
                .iter()
                .map(|a| CocoAnnotationOut {
                    id: a.id,
                    image_id: a.image_id,
                    category_id: a.category_id,
                    bbox: a.bbox.to_xywh(),
                    area: a.bbox.area(),
                    iscrowd: u8::from(a.iscrowd),
                })
                .collect(),
            categories: gt
                .categories
                .iter()
                .map(|c| CocoCategoryOut {
                    id: c.id,
                    name: &c.name,
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("ground truth serializes")
    }

    /// COCO result-format JSON array for the detections.
    pub fn detections_to_json(&self) -> String {
        let recs: Vec<CocoResultOut> = self
            .detections
            .iter()
            .map(|d| CocoResultOut {
                image_id: d.image_id,
                category_id: d.category_id,
                bbox: d.bbox.to_xywh(),
                score: d.score,
            })
            .collect();
        serde_json::to_string(&recs).expect("detections serialize")
    }
}

pub fn load_ground_truth(path: impl AsRef<Path>, scale_mode: ScaleMode) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Dataset::from_ground_truth_json(&text, scale_mode).map_err(|e| e.in_file(path))
}

pub fn load_detections(path: impl AsRef<Path>, gt: &Dataset) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    gt.attach_detections_json(&text).map_err(|e| e.in_file(path))
}

impl Error {
    fn root_message(&self) -> String {
        match self.root() {
            Error::Value(m) | Error::MalformedFile(m) | Error::Referential(m) | Error::UndefinedMetric(m) => m.clone(),
            e => e.to_string(),
        }
    }
}

fn bbox_from_slice(v: &[JsonNumber]) -> Result<BoundingBox> {
    match v {
        [x, y, w, h] => BoundingBox::new(x.0, y.0, w.0, h.0),
        _ => Err(Error::MalformedFile(format!(
            "bbox must have 4 elements, got {}",
            v.len()
        ))),
    }
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    match serde_json::from_str(text) {
        Ok(v) => Ok(v),
        Err(first) => {
            // Python's json module writes NaN/Infinity as bare tokens.
            match quote_nonfinite_tokens(text) {
                Some(fixed) => serde_json::from_str(&fixed).map_err(|_| Error::MalformedFile(first.to_string())),
                None => Err(Error::MalformedFile(first.to_string())),
            }
        }
    }
}

/// Rewrites bare `NaN`, `Infinity` and `-Infinity` tokens as strings so they can
/// reach validation. Returns `None` if there are none.
fn quote_nonfinite_tokens(text: &str) -> Option<String> {
    let bytes = text.as_bytes();
    let mut out = String::with_capacity(text.len() + 16);
    let mut in_string = false;
    let mut escaped = false;
    let mut changed = false;
    let mut last = 0;
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if in_string {
            if escaped {
                escaped = false;
            } else if c == b'\\' {
                escaped = true;
            } else if c == b'"' {
                in_string = false;
            }
            i += 1;
            continue;
        }
        if c == b'"' {
            in_string = true;
            i += 1;
            continue;
        }
        let rest = &bytes[i..];
        let token = ["-Infinity", "Infinity", "NaN"]
            .into_iter()
            .find(|t| rest.starts_with(t.as_bytes()));
        if let Some(t) = token {
            out.push_str(&text[last..i]);
            out.push('"');
            out.push_str(t);
            out.push('"');
            i += t.len();
            last = i;
            changed = true;
        } else {
            i += 1;
        }
    }
    if !changed {
        return None;
    }
    out.push_str(&text[last..]);
    Some(out)
}

/// A JSON number, also accepting the quoted forms produced by [`quote_nonfinite_tokens`].
#[derive(Debug, Clone, Copy)]
struct JsonNumber(f64);

impl<'de> Deserialize<'de> for JsonNumber {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = JsonNumber;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<JsonNumber, E> {
                Ok(JsonNumber(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<JsonNumber, E> {
                Ok(JsonNumber(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<JsonNumber, E> {
                Ok(JsonNumber(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<JsonNumber, E> {
                match v {
                    "NaN" => Ok(JsonNumber(f64::NAN)),
                    "Infinity" => Ok(JsonNumber(f64::INFINITY)),
                    "-Infinity" => Ok(JsonNumber(f64::NEG_INFINITY)),
                    _ => Err(E::invalid_type(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// `iscrowd` appears as 0/1 in COCO files and occasionally as a bool.
#[derive(Debug, Clone, Copy)]
struct CrowdFlag(bool);

impl<'de> Deserialize<'de> for CrowdFlag {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = CrowdFlag;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("0, 1 or a boolean")
            }
            fn visit_bool<E: de::Error>(self, v: bool) -> std::result::Result<CrowdFlag, E> {
                Ok(CrowdFlag(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<CrowdFlag, E> {
                Ok(CrowdFlag(v != 0))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<CrowdFlag, E> {
                Ok(CrowdFlag(v != 0))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Deserialize)]
struct CocoGroundTruthFile {
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
    categories: Vec<CocoCategory>,
}

#[derive(Deserialize)]
struct CocoImage {
    id: u64,
    width: JsonNumber,
    height: JsonNumber,
}

#[derive(Deserialize)]
struct CocoAnnotation {
    id: u64,
    image_id: u64,
    category_id: u64,
    bbox: Vec<JsonNumber>,
    #[serde(default)]
    iscrowd: Option<CrowdFlag>,
}

#[derive(Deserialize)]
struct CocoCategory {
    id: u64,
    #[serde(default)]
    name: String,
}

#[derive(Deserialize)]
struct CocoResult {
    image_id: u64,
    category_id: u64,
    bbox: Vec<JsonNumber>,
    score: JsonNumber,
}

/// Integral values print without a fractional part.
struct JsonNumberOut(f64);

impl Serialize for JsonNumberOut {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.fract() == 0.0 && self.0.abs() < 9.0e15 {
            s.serialize_i64(self.0 as i64)
        } else {
            s.serialize_f64(self.0)
        }
    }
}

#[derive(Serialize)]
struct CocoGroundTruthOut<'a> {
    images: Vec<CocoImageOut>,
    annotations: Vec<CocoAnnotationOut>,
    categories: Vec<CocoCategoryOut<'a>>,
}

#[derive(Serialize)]
struct CocoImageOut {
    id: u64,
    width: JsonNumberOut,
    height: JsonNumberOut,
}

#[derive(Serialize)]
struct CocoAnnotationOut {
    id: u64,
    image_id: u64,
    category_id: u64,
    bbox: [f64; 4],
    area: f64,
    iscrowd: u8,
}

#[derive(Serialize)]
struct CocoCategoryOut<'a> {
    id: u64,
    name: &'a str,
}

#[derive(Serialize)]
struct CocoResultOut {
    image_id: u64,
    category_id: u64,
    bbox: [f64; 4],
    score: f64,
}
