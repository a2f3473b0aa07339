//! Output formats for reports.

use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::report::{Cell, Heatmap, Report};

pub fn csv(report: &Report) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&report.columns)?;
    for row in &report.rows {
        w.write_record(row.iter().map(|c| c.to_string()))?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

fn cell_json(c: &Cell) -> Value {
    match c {
        Cell::Text(s) => json!(s),
        Cell::Int(v) => json!(v),
        Cell::Num(v) if v.is_finite() => json!(v),
        Cell::Num(v) => json!(v.to_string()),
    }
}

pub fn json(report: &Report) -> Vec<u8> {
    let value = json!({
        "report": report.name,
        "columns": report.columns,
        "rows": report
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(cell_json).collect()))
            .collect::<Vec<_>>(),
    });
    let mut out = serde_json::to_vec_pretty(&value).expect("report serialization is infallible");
    out.push(b'\n');
    out
}

const LOW: (f64, f64, f64) = (33.0, 64.0, 154.0);
const HIGH: (f64, f64, f64) = (253.0, 231.0, 37.0);
const MISSING: &str = "#bdbdbd";

/// Linear sRGB interpolation from dark blue `#21409a` (t = 0) to yellow
/// `#fde725` (t = 1).
pub fn colormap(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let mix = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(LOW.0, HIGH.0), mix(LOW.1, HIGH.1), mix(LOW.2, HIGH.2))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

const CELL_W: usize = 64;
const CELL_H: usize = 24;
const LABEL_W: usize = 150;
const HEADER_H: usize = 90;

/// Heatmap scaled to the finite value range; the range is printed in the
/// title. Missing values are gray.
pub fn svg(map: &Heatmap) -> Vec<u8> {
    let finite: Vec<f64> = map.values.iter().flatten().flatten().copied().filter(|v| v.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = LABEL_W + CELL_W * map.columns.len() + 10;
    let height = HEADER_H + CELL_H * map.rows.len() + 10;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="10">"#
    );
    let range = if finite.is_empty() {
        "no data".to_string()
    } else {
        format!("{lo:.4} to {hi:.4}")
    };
    let _ = writeln!(
        s,
        r#"<text x="4" y="14" font-size="12">{} ({})</text>"#,
        escape(&map.title),
        range
    );
    for (c, name) in map.columns.iter().enumerate() {
        let x = LABEL_W + c * CELL_W + CELL_W / 2;
        let y = HEADER_H - 6;
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" transform="rotate(-45 {x} {y})">{}</text>"#,
            escape(name)
        );
    }
    for (r, name) in map.rows.iter().enumerate() {
        let y = HEADER_H + r * CELL_H;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            LABEL_W - 6,
            y + CELL_H / 2 + 4,
            escape(name)
        );
        for (c, value) in map.values[r].iter().enumerate() {
            let x = LABEL_W + c * CELL_W;
            let (fill, label) = match value {
                Some(v) if v.is_finite() => {
                    let t = if hi > lo { (v - lo) / (hi - lo) } else { 1.0 };
                    (colormap(t), format!("{v:.3}"))
                }
                _ => (MISSING.to_string(), String::new()),
            };
            let _ = writeln!(
                s,
                r##"<rect x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="{fill}" stroke="#ffffff"/>"##
            );
            if !label.is_empty() {
                let _ = writeln!(
                    s,
                    r#"<text x="{}" y="{}" text-anchor="middle">{label}</text>"#,
                    x + CELL_W / 2,
                    y + CELL_H / 2 + 4
                );
            }
        }
    }
    s.push_str("</svg>\n");
    s.into_bytes()
}
