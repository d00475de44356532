//! CSV, JSON and SVG writers shared by the library and the command line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::Result;

/// Writes rows of floats; `{}` formatting of `f64` round-trips exactly.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    fs::write(path, csv_string(header, rows))?;
    Ok(())
}

pub fn csv_string(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let line: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| crate::Error::InvalidInput(format!("json: {e}")))?;
    fs::write(path, text)?;
    Ok(())
}

pub struct Series<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub points: Vec<(f64, f64)>,
}

fn bounds(pts: impl Iterator<Item = (f64, f64)>) -> (f64, f64, f64, f64) {
    let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in pts {
        if x.is_finite() && y.is_finite() {
            b.0 = b.0.min(x);
            b.1 = b.1.max(x);
            b.2 = b.2.min(y);
            b.3 = b.3.max(y);
        }
    }
    if b.1 <= b.0 {
        b.1 = b.0 + 1.0;
    }
    if b.3 <= b.2 {
        b.3 = b.2 + 1.0;
    }
    b
}

/// A line chart inside the rectangle `(ox, oy, w, h)`.
pub fn svg_chart(out: &mut String, rect: (f64, f64, f64, f64), title: &str, series: &[Series]) {
    let (ox, oy, w, h) = rect;
    let (x0, x1, y0, y1) = bounds(series.iter().flat_map(|s| s.points.iter().copied()));
    let px = |x: f64| ox + (x - x0) / (x1 - x0) * w;
    let py = |y: f64| oy + h - (y - y0) / (y1 - y0) * h;
    let _ = writeln!(
        out,
        r#"<rect x="{ox}" y="{oy}" width="{w}" height="{h}" fill="none" stroke="gray"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="12">{}</text>"#,
        ox + 4.0,
        oy - 4.0,
        title
    );
    if y0 < 0.0 && y1 > 0.0 {
        let _ = writeln!(
            out,
            r#"<line x1="{ox}" y1="{0}" x2="{1}" y2="{0}" stroke="lightgray"/>"#,
            py(0.0),
            ox + w
        );
    }
    for (k, s) in series.iter().enumerate() {
        let mut d = String::new();
        let mut pen = false;
        for &(x, y) in &s.points {
            if !(x.is_finite() && y.is_finite()) {
                pen = false;
                continue;
            }
            let _ = write!(d, "{}{:.2},{:.2} ", if pen { "L" } else { "M" }, px(x), py(y));
            pen = true;
        }
        let _ = writeln!(
            out,
            r#"<path d="{d}" fill="none" stroke="{}" stroke-width="1"/>"#,
            s.color
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="10" fill="{}">{}</text>"#,
            ox + w - 90.0,
            oy + 12.0 + 12.0 * k as f64,
            s.color,
            s.label
        );
    }
}

/// Polylines drawn with equal axis scaling inside `(ox, oy, w, h)`.
pub fn svg_planar(out: &mut String, rect: (f64, f64, f64, f64), title: &str, lines: &[Series]) {
    let (ox, oy, w, h) = rect;
    let (x0, x1, y0, y1) = bounds(lines.iter().flat_map(|s| s.points.iter().copied()));
    let scale = (w / (x1 - x0)).min(h / (y1 - y0));
    let cx = 0.5 * (x0 + x1);
    let cy = 0.5 * (y0 + y1);
    let px = |x: f64| ox + 0.5 * w + (x - cx) * scale;
    let py = |y: f64| oy + 0.5 * h - (y - cy) * scale;
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="12">{}</text>"#,
        ox + 4.0,
        oy - 4.0,
        title
    );
    for s in lines {
        let mut d = String::new();
        for (k, &(x, y)) in s.points.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2} ", if k == 0 { "M" } else { "L" }, px(x), py(y));
        }
        let _ = writeln!(
            out,
            r#"<path d="{d}" fill="none" stroke="{}" stroke-width="0.8"/>"#,
            s.color
        );
    }
}

fn ramp(t: f64) -> (u8, u8, u8) {
    const STOPS: [(f64, f64, f64); 5] = [
        (68.0, 1.0, 84.0),
        (59.0, 82.0, 139.0),
        (33.0, 145.0, 140.0),
        (94.0, 201.0, 98.0),
        (253.0, 231.0, 37.0),
    ];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 } * 4.0;
    let k = (t.floor() as usize).min(3);
    let f = t - k as f64;
    let (a, b) = (STOPS[k], STOPS[k + 1]);
    let mix = |x: f64, y: f64| (x + f * (y - x)).round() as u8;
    (mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Scattered values drawn as squares of side `cell` (data units), equal axis scaling.
pub fn svg_heatmap(out: &mut String, rect: (f64, f64, f64, f64), title: &str, points: &[([f64; 2], f64)], cell: f64) {
    let (ox, oy, w, h) = rect;
    let (x0, x1, y0, y1) = bounds(points.iter().map(|p| (p.0[0], p.0[1])));
    let (x0, x1, y0, y1) = (x0 - cell, x1 + cell, y0 - cell, y1 + cell);
    let scale = (w / (x1 - x0)).min(h / (y1 - y0));
    let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
    let (lo, hi) = points
        .iter()
        .filter(|p| p.1.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="12">{} [{:.3e}, {:.3e}]</text>"#,
        ox + 4.0,
        oy - 4.0,
        title,
        lo,
        hi
    );
    let side = cell * scale;
    for (x, v) in points {
        let (r, g, b) = ramp((v - lo) / span);
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({r},{g},{b})"/>"#,
            ox + 0.5 * w + (x[0] - cx) * scale - 0.5 * side,
            oy + 0.5 * h - (x[1] - cy) * scale - 0.5 * side,
            side,
            side
        );
    }
}

pub fn svg_document(width: f64, height: f64, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}
