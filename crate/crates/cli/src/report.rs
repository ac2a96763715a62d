//! Output formatting: CSV tables, a bare-bones SVG line chart, file hashes.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Percentages and signed percent impacts.
pub fn pct(v: f64) -> String {
    format!("{v:.4}")
}

/// Every other float.
pub fn num(v: f64) -> String {
    format!("{v:.10}")
}

pub fn opt(v: Option<f64>, f: fn(f64) -> String) -> String {
    v.map(f).unwrap_or_default()
}

/// An in-memory CSV table, written to disk in one go.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Result<Self> {
        let mut writer =
            csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Self { writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn into_bytes(self) -> Result<Vec<u8>> {
        self.writer.into_inner().map_err(|e| anyhow::anyhow!("flushing csv: {}", e.error()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to `dir/name` and returns its manifest entry.
pub fn write_output(dir: &Path, name: &str, bytes: &[u8]) -> Result<OutputFile> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(OutputFile { file: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 })
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
    pub dashed: bool,
}

impl Series {
    pub fn new(name: &str, points: Vec<(f64, f64)>, color: &'static str, dashed: bool) -> Self {
        Self { name: name.to_string(), points, color, dashed }
    }
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A minimal time-series chart. Lines break where consecutive x values are
/// more than one unit apart, so skipped years show as gaps.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (x0, x1) = bounds(all().map(|p| p.0));
    let (y0, y1) = bounds(all().map(|p| p.1));
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<line x1="{LEFT}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{b}" stroke="black"/>"#,
        b = TOP + plot_h,
        r = LEFT + plot_w
    );
    for t in 0..=5 {
        let f = t as f64 / 5.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            out,
            r#"<line x1="{px:.1}" y1="{b}" x2="{px:.1}" y2="{b5}" stroke="black"/><text x="{px:.1}" y="{bt}" text-anchor="middle">{xv:.0}</text>"#,
            b = TOP + plot_h,
            b5 = TOP + plot_h + 5.0,
            bt = TOP + plot_h + 20.0
        );
        let _ = writeln!(
            out,
            r#"<line x1="{l5}" y1="{py:.1}" x2="{LEFT}" y2="{py:.1}" stroke="black"/><text x="{lt}" y="{py:.1}" text-anchor="end" dominant-baseline="middle">{yv:.3}</text>"#,
            l5 = LEFT - 5.0,
            lt = LEFT - 8.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{y}" text-anchor="middle" transform="rotate(-90 16 {y})">{}</text>"#,
        escape(y_label),
        y = TOP + plot_h / 2.0
    );

    for (k, s) in series.iter().enumerate() {
        let dash = if s.dashed { r#" stroke-dasharray="5,4""# } else { "" };
        let mut segment: Vec<String> = Vec::new();
        let mut last_x = f64::NAN;
        let flush = |segment: &mut Vec<String>, out: &mut String| {
            if segment.len() > 1 {
                let _ = writeln!(
                    out,
                    r#"<polyline fill="none" stroke="{}" stroke-width="1.5"{dash} points="{}"/>"#,
                    s.color,
                    segment.join(" ")
                );
            } else if let Some(p) = segment.first() {
                let (cx, cy) = p.split_once(',').unwrap_or(("0", "0"));
                let _ = writeln!(out, r#"<circle cx="{cx}" cy="{cy}" r="2" fill="{}"/>"#, s.color);
            }
            segment.clear();
        };
        for &(x, y) in &s.points {
            if !(x.is_finite() && y.is_finite()) {
                flush(&mut segment, &mut out);
                continue;
            }
            if x - last_x > 1.0 + 1e-9 {
                flush(&mut segment, &mut out);
            }
            segment.push(format!("{:.1},{:.1}", sx(x), sy(y)));
            last_x = x;
        }
        flush(&mut segment, &mut out);

        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = LEFT + plot_w + 15.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{}" stroke-width="1.5"{dash}/><text x="{}" y="{ly}" dominant-baseline="middle">{}</text>"#,
            lx + 20.0,
            s.color,
            lx + 25.0,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}
