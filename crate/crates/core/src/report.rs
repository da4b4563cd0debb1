//! Metric suites: configuration, multi-file runs, and report serialization.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::chart::{PlotSpec, Series};
use crate::data::{load_detections, load_ground_truth, ScaleMode};
use crate::error::{Error, Result};
use crate::evaluate::{evaluate_suite, BandResult, EvalParams, MetricReport};
use crate::filter::{preset, FilterBank};

/// Bumped whenever the report JSON layout changes; see `schema/report.schema.json`.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: &str = "label,ap,ap50,ap75,gt_weight_sum,gt_nonzero_count";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OutputFormat {
    Text,
    Json,
    Csv,
    Svg,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Text => "txt",
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
            OutputFormat::Svg => "svg",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(OutputFormat::Text),
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "svg" => Ok(OutputFormat::Svg),
            other => Err(Error::Value(format!("unknown output format {other:?}"))),
        }
    }
}

/// Resolves `coco`, `asap`, `bandasap`, or a path to a bank JSON file.
pub fn resolve_bank(spec: &str) -> Result<FilterBank> {
    match preset(spec) {
        Some(bank) => Ok(bank),
        None if Path::new(spec).exists() => FilterBank::load(spec),
        None => Err(Error::Value(format!(
            "{spec:?} is neither a preset (coco, asap, bandasap) nor an existing bank file"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub bank: FilterBank,
    pub scale_mode: ScaleMode,
    pub params: EvalParams,
    pub output_formats: Vec<OutputFormat>,
}

impl SuiteConfig {
    pub fn new(bank: FilterBank) -> Self {
        SuiteConfig {
            bank,
            scale_mode: ScaleMode::Absolute,
            params: EvalParams::default(),
            output_formats: vec![OutputFormat::Json],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.output_formats.is_empty() {
            return Err(Error::Value("at least one output format is required".into()));
        }
        if self.params.max_dets == 0 {
            return Err(Error::Value("max_dets must be at least 1".into()));
        }
        Ok(())
    }
}

/// One report per detection file, all against the same ground truth and bank.
pub fn run_suite(gt_path: &Path, det_paths: &[PathBuf], config: &SuiteConfig) -> Result<Vec<MetricReport>> {
    config.validate()?;
    if det_paths.is_empty() {
        return Err(Error::Value("at least one detection file is required".into()));
    }
    let gt = load_ground_truth(gt_path, config.scale_mode)?;
    det_paths
        .iter()
        .map(|p| {
            let ds = load_detections(p, &gt)?;
            evaluate_suite(&ds, &config.bank, &config.params).map_err(|e| e.in_file(p))
        })
        .collect()
}

/// Grouped-bar chart input, one series per report.
pub fn plot_spec(title: &str, reports: &[(String, &MetricReport)]) -> Result<PlotSpec> {
    let Some((_, first)) = reports.first() else {
        return Err(Error::Value("no reports to plot".into()));
    };
    let bands: Vec<String> = first.bands.iter().map(|b| b.label.clone()).collect();
    let mut series = Vec::with_capacity(reports.len());
    for (name, r) in reports {
        let labels: Vec<&str> = r.bands.iter().map(|b| b.label.as_str()).collect();
        if labels != bands.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::Value(format!("report {name} uses different bands")));
        }
        series.push(Series {
            name: name.clone(),
            values: r.bands.iter().map(|b| b.ap).collect(),
        });
    }
    PlotSpec::new(title, bands, series)
}

#[derive(Serialize)]
struct ReportJson<'a> {
    schema_version: u32,
    suite: &'a str,
    scale_mode: String,
    max_dets: usize,
    iou_thresholds: &'a [f64],
    bands: Vec<BandJson<'a>>,
    overall: OverallJson,
    notes: &'a [String],
}

#[derive(Serialize)]
struct BandJson<'a> {
    label: &'a str,
    ap: Option<f64>,
    ap50: Option<f64>,
    ap75: Option<f64>,
    gt_weight_sum: f64,
    gt_nonzero_count: usize,
}

#[derive(Serialize)]
struct OverallJson {
    ap: Option<f64>,
    ap50: Option<f64>,
    ap75: Option<f64>,
}

/// Report JSON, full precision, undefined values as `null`.
pub fn report_to_json(report: &MetricReport) -> String {
    let doc = ReportJson {
        schema_version: REPORT_SCHEMA_VERSION,
        suite: &report.suite,
        scale_mode: report.scale_mode.to_string(),
        max_dets: report.max_dets,
        iou_thresholds: &report.iou_thresholds,
        bands: report
            .bands
            .iter()
            .map(|b: &BandResult| BandJson {
                label: &b.label,
                ap: b.ap,
                ap50: b.ap50,
                ap75: b.ap75,
                gt_weight_sum: b.gt.weight_sum,
                gt_nonzero_count: b.gt.nonzero_count,
            })
            .collect(),
        overall: OverallJson {
            ap: report.overall.ap,
            ap50: report.overall.ap50,
            ap75: report.overall.ap75,
        },
        notes: &report.notes,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

fn fixed(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// One row per band; undefined values are empty cells.
pub fn report_to_csv(report: &MetricReport) -> String {
    let mut s = String::new();
    s.push_str(CSV_HEADER);
    s.push('\n');
    for b in &report.bands {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.6},{}",
            csv_field(&b.label),
            fixed(b.ap),
            fixed(b.ap50),
            fixed(b.ap75),
            b.gt.weight_sum,
            b.gt.nonzero_count
        );
    }
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn text_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "—".to_string())
}

pub fn report_to_text(report: &MetricReport) -> String {
    let width = report
        .bands
        .iter()
        .map(|b| b.label.chars().count())
        .max()
        .unwrap_or(0)
        .max(8);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "suite: {}  scale: {}  max_dets: {}  IoU thresholds: {}",
        report.suite,
        report.scale_mode,
        report.max_dets,
        report.iou_thresholds.len()
    );
    let _ = writeln!(
        s,
        "{:<width$}  {:>9}  {:>9}  {:>9}  {:>12}  {:>8}",
        "band", "AP", "AP50", "AP75", "gt_weight", "gt_count"
    );
    let row = |s: &mut String, label: &str, b: &BandResult| {
        let _ = writeln!(
            s,
            "{:<width$}  {:>9}  {:>9}  {:>9}  {:>12.3}  {:>8}",
            label,
            text_cell(b.ap),
            text_cell(b.ap50),
            text_cell(b.ap75),
            b.gt.weight_sum,
            b.gt.nonzero_count
        );
    };
    for b in &report.bands {
        row(&mut s, &b.label, b);
    }
    row(&mut s, "all", &report.overall);
    s
}

/// Side-by-side AP table for several reports over the same bank.
pub fn comparison_csv(reports: &[(String, &MetricReport)]) -> String {
    let mut s = String::from("label");
    for (name, _) in reports {
        let _ = write!(s, ",{}", csv_field(name));
    }
    s.push('\n');
    if let Some((_, first)) = reports.first() {
        for (i, b) in first.bands.iter().enumerate() {
            s.push_str(&csv_field(&b.label));
            for (_, r) in reports {
                let _ = write!(s, ",{}", fixed(r.bands.get(i).and_then(|b| b.ap)));
            }
            s.push('\n');
        }
    }
    s
}

/// Writes `<out_dir>/<stem>.<ext>` for each requested format and returns the paths.
pub fn write_report(
    report: &MetricReport,
    formats: &[OutputFormat],
    out_dir: &Path,
    stem: &str,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for &fmt in formats {
        let path = out_dir.join(format!("{stem}.{}", fmt.extension()));
        let body = match fmt {
            OutputFormat::Json => report_to_json(report),
            OutputFormat::Csv => report_to_csv(report),
            OutputFormat::Text => report_to_text(report),
            OutputFormat::Svg => {
                let spec = plot_spec(&report.suite, &[(stem.to_string(), report)])?;
                crate::chart::render_svg(&spec)?
            }
        };
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
