//! Band-pass membership functions over object scale and the filter banks built from them.
//!
//! A filter is the trapezoid `mu(x; a, b, c, d)` with ramps linear in `log(x)`.
//! Rectangular (`a = b`, `c = d`) and triangular (`a < b = c < d`) filters are
//! special cases. The ratio of log differences does not depend on the log base,
//! so the bank's `log_base` is descriptive only.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite stand-in for "unbounded" large scales.
pub const DEFAULT_TOP_CAP: f64 = 100_000.0;

/// Peaks of the default nine-band BandASAP bank.
pub const BAND_ASAP_PEAKS: [f64; 9] = [4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterShape {
    Rectangular,
    Triangular,
    Trapezoidal,
}

impl fmt::Display for FilterShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FilterShape::Rectangular => "rectangular",
            FilterShape::Triangular => "triangular",
            FilterShape::Trapezoidal => "trapezoidal",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleFilter {
    label: String,
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    /// Excludes `x = a` from a rectangular lower edge so adjacent bands do not
    /// both claim their shared boundary.
    lower_open: bool,
}

impl ScaleFilter {
    /// Requires `0 <= a <= b <= c <= d`. `c` and `d` may be infinite only together.
    /// A ramp starting at zero (`a = 0 < b`) has no meaning in log space and is rejected.
    pub fn new(label: impl Into<String>, a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let label = label.into();
        if label.is_empty() {
            return Err(Error::Value("filter label must not be empty".into()));
        }
        if !(a.is_finite() && b.is_finite()) || c.is_nan() || d.is_nan() {
            return Err(Error::Value(format!("filter {label}: parameters must be finite")));
        }
        if !(0.0 <= a && a <= b && b <= c && c <= d) {
            return Err(Error::Value(format!(
                "filter {label}: need 0 <= a <= b <= c <= d, got ({a}, {b}, {c}, {d})"
            )));
        }
        if d.is_infinite() && c.is_finite() {
            return Err(Error::Value(format!("filter {label}: falling ramp to infinity")));
        }
        if a == 0.0 && b > 0.0 {
            return Err(Error::Value(format!(
                "filter {label}: rising ramp from zero is undefined in log space"
            )));
        }
        Ok(ScaleFilter {
            label,
            a,
            b,
            c,
            d,
            lower_open: false,
        })
    }

    pub fn rectangular(label: impl Into<String>, lo: f64, hi: f64) -> Result<Self> {
        Self::new(label, lo, lo, hi, hi)
    }

    pub fn triangular(label: impl Into<String>, a: f64, peak: f64, d: f64) -> Result<Self> {
        let f = Self::new(label, a, peak, peak, d)?;
        if f.shape() != FilterShape::Triangular {
            return Err(Error::Value(format!("filter {}: triangle needs a < peak < d", f.label)));
        }
        Ok(f)
    }

    /// Triangle with its peak at the log-space midpoint of `a` and `d`.
    pub fn triangular_midpoint(label: impl Into<String>, a: f64, d: f64) -> Result<Self> {
        Self::triangular(label, a, (a * d).sqrt(), d)
    }

    /// Passes every scale with weight 1.
    pub fn all_pass(label: impl Into<String>) -> Self {
        Self::new(label, 0.0, 0.0, f64::INFINITY, f64::INFINITY).expect("valid all-pass filter")
    }

    pub fn with_open_lower_edge(mut self, open: bool) -> Self {
        self.lower_open = open;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn params(&self) -> (f64, f64, f64, f64) {
        (self.a, self.b, self.c, self.d)
    }

    pub fn lower_open(&self) -> bool {
        self.lower_open
    }

    pub fn shape(&self) -> FilterShape {
        if self.a == self.b && self.c == self.d {
            FilterShape::Rectangular
        } else if self.a < self.b && self.b == self.c && self.c < self.d {
            FilterShape::Triangular
        } else {
            FilterShape::Trapezoidal
        }
    }

    /// Membership weight of an object with scale `x`.
    pub fn membership(&self, x: f64) -> f64 {
        let (a, b, c, d) = (self.a, self.b, self.c, self.d);
        // also rejects NaN
        if !(x >= a) || x > d || (self.lower_open && x == a) {
            return 0.0;
        }
        if x < b {
            // a > 0 here, guaranteed by construction
            return (x.log2() - a.log2()) / (b.log2() - a.log2());
        }
        if x <= c {
            return 1.0;
        }
        (d.log2() - x.log2()) / (d.log2() - c.log2())
    }

    /// Peak scale of a triangular filter.
    pub fn peak(&self) -> Option<f64> {
        (self.shape() == FilterShape::Triangular).then_some(self.b)
    }

    /// Geometric mean of the support's infimum and supremum.
    pub fn geometric_mean(&self) -> f64 {
        (self.a * self.d).sqrt()
    }

    /// The single scale that names this band: the peak when there is one,
    /// otherwise the geometric mean of the support.
    pub fn representative_scale(&self) -> f64 {
        self.peak().unwrap_or_else(|| self.geometric_mean())
    }

    fn order_key(&self) -> f64 {
        (self.b + self.c) / 2.0
    }
}

/// Sum of membership weights and count of objects with nonzero weight.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EffectiveCount {
    pub weight_sum: f64,
    pub nonzero_count: usize,
}

pub fn effective_count<I: IntoIterator<Item = f64>>(filter: &ScaleFilter, scales: I) -> EffectiveCount {
    let mut weights = crate::fsum::ExactSum::new();
    let mut nonzero_count = 0;
    for x in scales {
        let w = filter.membership(x);
        if w > 0.0 {
            weights.add(w);
            nonzero_count += 1;
        }
    }
    EffectiveCount {
        weight_sum: weights.value(),
        nonzero_count,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    name: String,
    filters: Vec<ScaleFilter>,
    log_base: f64,
}

impl FilterBank {
    /// Labels must be unique. Filters are ordered by the centre of their plateau.
    pub fn new(name: impl Into<String>, mut filters: Vec<ScaleFilter>, log_base: f64) -> Result<Self> {
        let name = name.into();
        if filters.is_empty() {
            return Err(Error::Value(format!("bank {name} has no filters")));
        }
        if !(log_base.is_finite() && log_base > 1.0) {
            return Err(Error::Value(format!(
                "bank {name}: log_base must be > 1, got {log_base}"
            )));
        }
        let mut labels = HashSet::new();
        for f in &filters {
            if !labels.insert(f.label.as_str()) {
                return Err(Error::Value(format!("bank {name}: duplicate label {}", f.label)));
            }
        }
        filters.sort_by(|x, y| x.order_key().total_cmp(&y.order_key()));
        Ok(FilterBank {
            name,
            filters,
            log_base,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn filters(&self) -> &[ScaleFilter] {
        &self.filters
    }

    pub fn log_base(&self) -> f64 {
        self.log_base
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<&ScaleFilter> {
        self.filters.iter().find(|f| f.label == label)
    }

    /// Σ μ(x) over the bank.
    pub fn membership_sum(&self, x: f64) -> f64 {
        self.filters.iter().map(|f| f.membership(x)).sum()
    }

    /// Filter whose representative scale is closest to `scale` in log space.
    pub fn closest_to(&self, scale: f64) -> &ScaleFilter {
        let target = scale.log2();
        self.filters
            .iter()
            .min_by(|x, y| {
                let dx = (x.representative_scale().log2() - target).abs();
                let dy = (y.representative_scale().log2() - target).abs();
                dx.total_cmp(&dy)
            })
            .expect("bank is non-empty")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: BankFile = serde_json::from_str(text).map_err(|e| Error::MalformedFile(e.to_string()))?;
        let filters = file
            .filters
            .into_iter()
            .map(|f| Ok(ScaleFilter::new(f.label, f.a, f.b, f.c, f.d)?.with_open_lower_edge(f.lower_open)))
            .collect::<Result<Vec<_>>>()?;
        FilterBank::new(file.name, filters, file.log_base)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.in_file(path))
    }

    /// Pretty-printed bank configuration, editable and reloadable with [`FilterBank::from_json`].
    pub fn to_json(&self) -> String {
        let file = BankFile {
            name: self.name.clone(),
            log_base: self.log_base,
            filters: self
                .filters
                .iter()
                .map(|f| FilterEntry {
                    label: f.label.clone(),
                    a: f.a,
                    b: f.b,
                    c: f.c,
                    d: f.d,
                    lower_open: f.lower_open,
                    shape: Some(f.shape()),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("bank serializes")
    }
}

fn default_log_base() -> f64 {
    2.0
}

fn is_false(v: &bool) -> bool {
    !*v
}

#[derive(Serialize, Deserialize)]
struct BankFile {
    name: String,
    #[serde(default = "default_log_base")]
    log_base: f64,
    filters: Vec<FilterEntry>,
}

#[derive(Serialize, Deserialize)]
struct FilterEntry {
    label: String,
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    #[serde(default, skip_serializing_if = "is_false")]
    lower_open: bool,
    /// Informational; the shape always follows from a, b, c, d.
    #[serde(default, skip_deserializing)]
    shape: Option<FilterShape>,
}

/// Rectangular bands over consecutive edges. The first band is closed at both
/// ends; every later band is open at its lower edge, so a shared boundary
/// belongs to the lower band and the bank partitions `[edges[0], edges[last]]`.
fn rectangular_partition(name: &str, labels: &[String], edges: &[f64]) -> FilterBank {
    assert_eq!(labels.len() + 1, edges.len());
    let filters = labels
        .iter()
        .enumerate()
        .map(|(i, label)| {
            ScaleFilter::rectangular(label.clone(), edges[i], edges[i + 1])
                .expect("valid preset edges")
                .with_open_lower_edge(i > 0)
        })
        .collect();
    FilterBank::new(name, filters, 2.0).expect("valid preset bank")
}

/// COCO small / medium / large over absolute scale.
pub fn make_coco_bank() -> FilterBank {
    let labels = ["small", "medium", "large"].map(String::from);
    rectangular_partition("coco", &labels, &[0.0, 32.0, 96.0, DEFAULT_TOP_CAP])
}

/// Nine octave-wide rectangular bands.
pub fn make_asap_bank() -> FilterBank {
    let edges = [0.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0, DEFAULT_TOP_CAP];
    let labels: Vec<String> = edges.windows(2).map(|w| format!("ASAP_{}_{}", w[0], w[1])).collect();
    rectangular_partition("asap", &labels, &edges)
}

/// Octave triangles `(p/2, p, p, 2p)` for every peak but the last, which gets
/// the trapezoid `(P/2, P, top_cap, top_cap)`.
pub fn make_band_asap_bank(peaks: &[f64], top_cap: f64) -> Result<FilterBank> {
    let Some(&last) = peaks.last() else {
        return Err(Error::Value("at least one peak is required".into()));
    };
    if peaks.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::Value("peaks must be positive and finite".into()));
    }
    if peaks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Value("peaks must be strictly increasing".into()));
    }
    if !(top_cap > last) {
        return Err(Error::Value(format!(
            "top cap {top_cap} must exceed the last peak {last}"
        )));
    }
    let mut filters = Vec::with_capacity(peaks.len());
    for (i, &p) in peaks.iter().enumerate() {
        let label = format!("BandASAP_{p}");
        let f = if i + 1 < peaks.len() {
            ScaleFilter::triangular(label, p / 2.0, p, 2.0 * p)?
        } else {
            ScaleFilter::new(label, p / 2.0, p, top_cap, top_cap)?
        };
        filters.push(f);
    }
    FilterBank::new("bandasap", filters, 2.0)
}

pub fn make_default_band_asap_bank() -> FilterBank {
    make_band_asap_bank(&BAND_ASAP_PEAKS, DEFAULT_TOP_CAP).expect("valid default peaks")
}

pub const PRESET_NAMES: [&str; 3] = ["coco", "asap", "bandasap"];

pub fn preset(name: &str) -> Option<FilterBank> {
    match name.to_ascii_lowercase().as_str() {
        "coco" => Some(make_coco_bank()),
        "asap" => Some(make_asap_bank()),
        "bandasap" | "band_asap" | "band-asap" => Some(make_default_band_asap_bank()),
        _ => None,
    }
}
