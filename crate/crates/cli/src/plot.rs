//! Plot-ready data: a long-format CSV and a static SVG line chart.
//!
//! The SVG depends only on the input values (fixed canvas, fixed tick
//! rules, fixed palette), so identical inputs give identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::output::{Cell, Sink};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 450.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct PlotOptions {
    pub x_column: Option<String>,
    pub y_column: Option<String>,
    pub log_x: bool,
    pub log_y: bool,
    pub title: Option<String>,
}

fn column(headers: &csv::StringRecord, name: Option<&str>, fallback: usize, path: &Path) -> Result<usize, String> {
    match name {
        Some(n) => headers
            .iter()
            .position(|h| h == n)
            .ok_or_else(|| format!("{}: no column '{n}'", path.display())),
        None if fallback < headers.len() => Ok(fallback),
        None => Err(format!("{}: needs at least two columns", path.display())),
    }
}

/// Reads one series from a CSV file with a header row.
pub fn read_series(path: &Path, opts: &PlotOptions) -> Result<Series, String> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let headers = rdr.headers().map_err(|e| format!("{}: {e}", path.display()))?.clone();
    let xi = column(&headers, opts.x_column.as_deref(), 0, path)?;
    let yi = column(&headers, opts.y_column.as_deref(), 1, path)?;
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| format!("{}: malformed CSV: {e}", path.display()))?;
        let parse = |i: usize| -> Result<f64, String> {
            let cell = rec.get(i).unwrap_or("");
            cell.trim()
                .parse::<f64>()
                .map_err(|_| format!("{}: row {}: '{cell}' is not a number", path.display(), line + 2))
        };
        x.push(parse(xi)?);
        y.push(parse(yi)?);
    }
    if x.is_empty() {
        return Err(format!("empty series: {}", path.display()));
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".into());
    Ok(Series { name, x, y })
}

struct Axis {
    log: bool,
    lo: f64,
    hi: f64,
    ticks: Vec<(f64, String)>,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Result<Axis, String> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in values.filter(|v| v.is_finite()) {
            if log && v <= 0.0 {
                return Err(format!("log axis needs positive values, got {v}"));
            }
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return Err("empty series: no finite values".into());
        }
        if hi - lo < 1e-12 * (1.0 + lo.abs()) {
            let pad = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
            lo -= pad;
            hi += pad;
        }
        let ticks = if log { log_ticks(lo, hi) } else { linear_ticks(lo, hi) };
        Ok(Axis { log, lo, hi, ticks })
    }

    fn map(&self, v: f64, from: f64, to: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        from + (v - self.lo) / (self.hi - self.lo) * (to - from)
    }
}

/// 1-2-5 steps giving at most six ticks.
fn linear_ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last)
        .map(|k| {
            let v = k as f64 * step;
            (v, format!("{:.*}", decimals, v))
        })
        .collect()
}

fn log_ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    let first = lo.ceil() as i64;
    let last = hi.floor() as i64;
    let stride = (((last - first) as f64 / 6.0).ceil() as i64).max(1);
    let mut out: Vec<(f64, String)> = (first..=last)
        .step_by(stride as usize)
        .map(|k| (10f64.powi(k as i32), format!("1e{k}")))
        .collect();
    if out.is_empty() {
        let mid = 10f64.powf(0.5 * (lo + hi));
        out.push((mid, format!("{mid:.3e}")));
    }
    out
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render_svg(series: &[Series], opts: &PlotOptions) -> Result<String, String> {
    if series.is_empty() || series.iter().all(|s| s.x.is_empty()) {
        return Err("empty series".into());
    }
    let xa = Axis::new(series.iter().flat_map(|s| s.x.iter().copied()), opts.log_x)?;
    let ya = Axis::new(series.iter().flat_map(|s| s.y.iter().copied()), opts.log_y)?;
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    if let Some(t) = &opts.title {
        let _ = writeln!(svg, r#"<text x="{:.2}" y="18" text-anchor="middle" font-size="14">{}</text>"#, (x0 + x1) / 2.0, esc(t));
    }
    let _ = writeln!(svg, r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#, x1 - x0, y0 - y1);
    for (v, label) in &xa.ticks {
        let px = xa.map(*v, x0, x1);
        let _ = writeln!(svg, r#"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#, y0 + 5.0);
        let _ = writeln!(svg, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, y0 + 19.0, esc(label));
    }
    for (v, label) in &ya.ticks {
        let py = ya.map(*v, y0, y1);
        let _ = writeln!(svg, r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0:.2}" y2="{py:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 8.0, py + 4.0, esc(label));
    }
    let xl = opts.x_column.clone().unwrap_or_else(|| "x".into());
    let yl = opts.y_column.clone().unwrap_or_else(|| "y".into());
    let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, HEIGHT - 15.0, esc(&xl));
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        esc(&yl)
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .x
            .iter()
            .zip(&s.y)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", xa.map(*x, x0, x1), ya.map(*y, y0, y1)))
            .collect();
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let ly = y1 + 10.0 + 18.0 * i as f64;
        let _ = writeln!(svg, r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#, x1 + 12.0, x1 + 32.0);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, x1 + 38.0, ly + 4.0, esc(&s.name));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Writes `plot.svg` and `plot_long.csv` (series, x, y) into `out`.
pub fn emit_plot_data(inputs: &[PathBuf], out: &Path, opts: &PlotOptions) -> Result<Vec<String>, String> {
    if inputs.is_empty() {
        return Err("empty series: no input files".into());
    }
    let series = inputs.iter().map(|p| read_series(p, opts)).collect::<Result<Vec<_>, _>>()?;
    let svg = render_svg(&series, opts)?;
    let mut sink = Sink::new(out, true, true).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<Cell>> = series
        .iter()
        .flat_map(|s| s.x.iter().zip(&s.y).map(move |(x, y)| vec![Cell::S(s.name.clone()), Cell::F(*x), Cell::F(*y)]))
        .collect();
    sink.csv("plot_long.csv", &["series", "x", "y"], &rows).map_err(|e| e.to_string())?;
    std::fs::write(out.join("plot.svg"), svg).map_err(|e| e.to_string())?;
    Ok(vec!["plot_long.csv".into(), "plot.svg".into()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tick_rules() {
        let t = linear_ticks(0.0, 1.0);
        assert_eq!(t.iter().map(|(_, l)| l.as_str()).collect::<Vec<_>>(), ["0.0", "0.2", "0.4", "0.6", "0.8", "1.0"]);
        let t = log_ticks(0.0, 3.0);
        assert_eq!(t.iter().map(|(_, l)| l.as_str()).collect::<Vec<_>>(), ["1e0", "1e1", "1e2", "1e3"]);
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(render_svg(&[], &PlotOptions::default()).unwrap_err().contains("empty series"));
    }

    #[test]
    fn log_axis_rejects_nonpositive() {
        let s = Series { name: "a".into(), x: vec![0.0, 1.0], y: vec![1.0, 2.0] };
        let opts = PlotOptions { log_x: true, ..Default::default() };
        assert!(render_svg(&[s], &opts).is_err());
    }
}
