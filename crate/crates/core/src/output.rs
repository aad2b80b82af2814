//! Artifact emission: CSV traces, SVG line plots, gnuplot scripts and the
//! plain-text report.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{invalid, Result};
use crate::experiments::EnergyTrace;

/// Fixed 17-significant-digit formatting.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Columns of equal length under a header row.
pub fn csv_string(headers: &[&str], columns: &[&[f64]]) -> Result<String> {
    if headers.len() != columns.len() || columns.is_empty() {
        return invalid("need one header per column and at least one column");
    }
    let rows = columns[0].len();
    if columns.iter().any(|c| c.len() != rows) {
        return invalid("columns differ in length");
    }
    let mut s = headers.join(",");
    s.push('\n');
    for i in 0..rows {
        for (j, c) in columns.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            s.push_str(&fmt_f64(c[i]));
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn write_csv(path: &Path, headers: &[&str], columns: &[&[f64]]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, csv_string(headers, columns)?)?;
    Ok(())
}

/// `t,E,L2,H1`
pub fn write_trace(path: &Path, trace: &EnergyTrace) -> Result<()> {
    write_csv(
        path,
        &["t", "E", "L2", "H1"],
        &[&trace.times, &trace.energy, &trace.l2, &trace.h1],
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl Series {
    pub fn new(label: impl Into<String>, xs: Vec<f64>, ys: Vec<f64>) -> Self {
        Series {
            label: label.into(),
            xs,
            ys,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlotStyle {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub annotation: Option<String>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 40.0, 50.0); // left, right, top, bottom
const MAX_POINTS: usize = 2000;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn axis_value(x: f64, log: bool) -> Option<f64> {
    if log {
        (x > 0.0).then(|| x.log10())
    } else {
        x.is_finite().then_some(x)
    }
}

fn range(vals: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return None;
    }
    if hi - lo < 1e-300_f64.max(1e-12 * lo.abs()) {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

/// Deterministic SVG line plot; long series are thinned to a fixed stride.
pub fn render_svg(series: &[Series], style: &PlotStyle) -> Result<String> {
    if series.is_empty() || series.iter().any(|s| s.xs.is_empty()) {
        return invalid("cannot plot an empty trace");
    }
    if series.iter().any(|s| s.xs.len() != s.ys.len()) {
        return invalid("series coordinates differ in length");
    }
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            let stride = s.xs.len().div_ceil(MAX_POINTS).max(1);
            let last = s.xs.len() - 1;
            s.xs.iter()
                .zip(&s.ys)
                .enumerate()
                .filter(|(i, _)| i % stride == 0 || *i == last)
                .filter_map(|(_, (x, y))| Some((axis_value(*x, style.log_x)?, axis_value(*y, style.log_y)?)))
                .collect()
        })
        .collect();
    let Some((x0, x1)) = range(pts.iter().flatten().map(|p| p.0)) else {
        return invalid("no plottable points");
    };
    let (y0, y1) = range(pts.iter().flatten().map(|p| p.1)).expect("same points");
    let (ml, mr, mt, mb) = MARGIN;
    let pw = WIDTH - ml - mr;
    let ph = HEIGHT - mt - mb;
    let sx = |x: f64| ml + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| mt + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(&style.title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{ml:.1}" y="{mt:.1}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            s,
            r##"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="#ddd"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            mt,
            mt + ph,
            mt + ph + 16.0,
            tick(xv, style.log_x)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{ml:.2}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            ml + pw,
            ml - 6.0,
            py + 4.0,
            tick(yv, style.log_y)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        ml + pw / 2.0,
        HEIGHT - 10.0,
        escape(&style.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        mt + ph / 2.0,
        mt + ph / 2.0,
        escape(&style.y_label)
    );
    for (i, (ser, p)) in series.iter().zip(&pts).enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut d = String::new();
        for (j, (x, y)) in p.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2}", if j == 0 { "M" } else { " L" }, sx(*x), sy(*y));
        }
        let _ = writeln!(s, r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.2"/>"#);
        let ly = mt + 14.0 + 16.0 * i as f64;
        let lx = ml + pw - 150.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{ly:.1}">{}</text>"#,
            ly - 4.0,
            lx + 20.0,
            ly - 4.0,
            lx + 26.0,
            escape(&ser.label)
        );
    }
    if let Some(note) = &style.annotation {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            ml + 10.0,
            mt + ph - 10.0,
            escape(note)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn tick(v: f64, log: bool) -> String {
    if log {
        format!("{:.3}", 10f64.powf(v))
    } else if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn write_svg(path: &Path, series: &[Series], style: &PlotStyle) -> Result<()> {
    let svg = render_svg(series, style)?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, svg)?;
    Ok(())
}

/// Gnuplot script plotting column `y_col` against column 1 of each CSV.
pub fn gnuplot_script(csvs: &[(&str, &str)], y_col: usize, style: &PlotStyle) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set title \"{}\"", style.title);
    let _ = writeln!(s, "set xlabel \"{}\"", style.x_label);
    let _ = writeln!(s, "set ylabel \"{}\"", style.y_label);
    if style.log_x {
        let _ = writeln!(s, "set logscale x");
    }
    if style.log_y {
        let _ = writeln!(s, "set logscale y");
    }
    let plots: Vec<String> = csvs
        .iter()
        .map(|(file, label)| format!("'{file}' using 1:{y_col} with lines title '{label}'"))
        .collect();
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    s
}

/// One built-in invariant check.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Checks and computed values of a run, rendered to `report.txt`.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct Report {
    pub title: String,
    pub checks: Vec<Check>,
    pub values: Vec<(String, f64)>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(title: impl Into<String>) -> Self {
        Report {
            title: title.into(),
            ..Default::default()
        }
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn value(&mut self, name: impl Into<String>, v: f64) {
        self.values.push((name.into(), v));
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = format!("{}\n", self.title);
        if !self.values.is_empty() {
            s.push_str("\nvalues\n");
            for (k, v) in &self.values {
                let _ = writeln!(s, "  {k} = {}", fmt_f64(*v));
            }
        }
        if !self.checks.is_empty() {
            s.push_str("\nchecks\n");
            for c in &self.checks {
                let _ = writeln!(
                    s,
                    "  [{}] {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
        }
        for n in &self.notes {
            let _ = writeln!(s, "\n{n}");
        }
        s
    }
}
