//! Grouped bar charts of per-band AP as standalone SVG.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

const PALETTE: [&str; 8] = [
    "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    /// One entry per band; `None` marks an undefined band.
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub title: String,
    pub bands: Vec<String>,
    pub series: Vec<Series>,
    /// Label the axis 0-100 instead of 0-1.
    pub percent: bool,
}

impl PlotSpec {
    pub fn new(title: impl Into<String>, bands: Vec<String>, series: Vec<Series>) -> Result<Self> {
        let spec = PlotSpec {
            title: title.into(),
            bands,
            series,
            percent: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.series.is_empty() {
            return Err(Error::Value("plot needs at least one series".into()));
        }
        if self.bands.is_empty() {
            return Err(Error::Value("plot needs at least one band".into()));
        }
        for s in &self.series {
            if s.values.len() != self.bands.len() {
                return Err(Error::Value(format!(
                    "series {} has {} values for {} bands",
                    s.name,
                    s.values.len(),
                    self.bands.len()
                )));
            }
        }
        Ok(())
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

pub fn render_svg(spec: &PlotSpec) -> Result<String> {
    spec.validate()?;
    let n_series = spec.series.len();
    let bar_w = 14.0;
    let group_gap = 18.0;
    let group_w = n_series as f64 * bar_w + group_gap;
    let (left, right, top, bottom) = (56.0, 180.0, 40.0, 90.0);
    let plot_h = 260.0;
    let plot_w = spec.bands.len() as f64 * group_w;
    let width = left + plot_w + right;
    let height = top + plot_h + bottom;
    let y_of = |v: f64| top + plot_h * (1.0 - v.clamp(0.0, 1.0));
    let any_undefined = spec.series.iter().any(|s| s.values.iter().any(Option::is_none));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    s.push_str(
        r##"<defs><pattern id="hatch" width="6" height="6" patternUnits="userSpaceOnUse" patternTransform="rotate(45)"><line x1="0" y1="0" x2="0" y2="6" stroke="#999" stroke-width="2"/></pattern></defs>
"##,
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{width:.0}" height="{height:.0}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        left + plot_w / 2.0,
        escape(&spec.title)
    );

    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let y = y_of(v);
        let label = if spec.percent {
            format!("{:.0}", v * 100.0)
        } else {
            format!("{v:.1}")
        };
        let _ = writeln!(
            s,
            r##"<line x1="{left:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"##,
            left + plot_w,
            left - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{left:.1}" y1="{top:.1}" x2="{left:.1}" y2="{:.1}" stroke="black"/><line x1="{left:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"#,
        top + plot_h,
        top + plot_h,
        left + plot_w,
        top + plot_h
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0,
        if spec.percent { "AP (%)" } else { "AP" }
    );

    for (g, band) in spec.bands.iter().enumerate() {
        let gx = left + g as f64 * group_w + group_gap / 2.0;
        for (k, series) in spec.series.iter().enumerate() {
            let x = gx + k as f64 * bar_w;
            match series.values[g] {
                Some(v) => {
                    let y = y_of(v);
                    let _ = writeln!(
                        s,
                        r#"<rect class="bar" x="{x:.1}" y="{y:.1}" width="{bar_w:.1}" height="{:.1}" fill="{}"><title>{} {}: {v:.4}</title></rect>"#,
                        top + plot_h - y,
                        PALETTE[k % PALETTE.len()],
                        escape(&series.name),
                        escape(band)
                    );
                }
                None => {
                    let _ = writeln!(
                        s,
                        r#"<rect class="undefined" x="{x:.1}" y="{top:.1}" width="{bar_w:.1}" height="{plot_h:.1}" fill="url(#hatch)" fill-opacity="0.5" stroke="{}" stroke-dasharray="2,2"><title>{} {}: undefined</title></rect>"#,
                        PALETTE[k % PALETTE.len()],
                        escape(&series.name),
                        escape(band)
                    );
                }
            }
        }
        let lx = gx + n_series as f64 * bar_w / 2.0;
        let ly = top + plot_h + 14.0;
        let _ = writeln!(
            s,
            r#"<text x="{lx:.1}" y="{ly:.1}" text-anchor="end" transform="rotate(-35 {lx:.1} {ly:.1})">{}</text>"#,
            escape(band)
        );
    }

    let lx = left + plot_w + 16.0;
    for (k, series) in spec.series.iter().enumerate() {
        let y = top + 10.0 + k as f64 * 18.0;
        let _ = writeln!(
            s,
            r#"<rect class="legend" x="{lx:.1}" y="{:.1}" width="12" height="12" fill="{}"/><text x="{:.1}" y="{y:.1}">{}</text>"#,
            y - 10.0,
            PALETTE[k % PALETTE.len()],
            lx + 18.0,
            escape(&series.name)
        );
    }
    if any_undefined {
        let y = top + 10.0 + n_series as f64 * 18.0 + 6.0;
        let _ = writeln!(
            s,
            r#"<rect class="legend" x="{lx:.1}" y="{:.1}" width="12" height="12" fill="url(#hatch)"/><text x="{:.1}" y="{y:.1}">undefined (no weighted GT)</text>"#,
            y - 10.0,
            lx + 18.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn render_bar_chart(spec: &PlotSpec, path: &Path) -> Result<()> {
    let svg = render_svg(spec)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
