use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes records under the header `step,t,J,K,D,A,C,U,H,L`.
pub fn write_csv(records: &[DiagnosticsRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(DiagnosticsRecord::FIELDS).map_err(csv_err)?;
    for r in records {
        let mut row = vec![r.step.to_string(), fmt_f64(r.t)];
        row.extend(r.values().iter().map(|&v| fmt_f64(v)));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let mut rd = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if header != DiagnosticsRecord::FIELDS {
        return Err(Error::Io(format!("{}: unexpected header {header:?}", path.display())));
    }
    let bad = |line: usize| Error::Io(format!("{}: malformed row {line}", path.display()));
    let mut out = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let step: u64 = row.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| bad(i + 2))?;
        let v: Vec<f64> = (1..10)
            .map(|k| row.get(k).and_then(|s| s.parse().ok()))
            .collect::<Option<_>>()
            .ok_or_else(|| bad(i + 2))?;
        out.push(DiagnosticsRecord { step, t: v[0], J: v[1], K: v[2], D: v[3], A: v[4], C: v[5], U: v[6], H: v[7], L: v[8] });
    }
    Ok(out)
}

/// One row of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub rule: String,
    pub eps: Option<f64>,
    pub final_j: f64,
    pub final_h: f64,
    pub max_p_norm: f64,
    pub steps: u64,
}

pub fn write_summary(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["rule", "eps", "final_J", "final_H", "max_P_norm", "steps"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.rule.clone(),
            r.eps.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.final_j),
            fmt_f64(r.final_h),
            fmt_f64(r.max_p_norm),
            r.steps.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut rd = csv::Reader::from_path(path).map_err(csv_err)?;
    let bad = || Error::Io(format!("{}: malformed summary", path.display()));
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row.map_err(csv_err)?;
        let f = |k: usize| row.get(k).and_then(|s| s.parse::<f64>().ok()).ok_or_else(bad);
        out.push(SummaryRow {
            rule: row.get(0).ok_or_else(bad)?.to_string(),
            eps: match row.get(1) {
                Some("") => None,
                Some(s) => Some(s.parse().map_err(|_| bad())?),
                None => return Err(bad()),
            },
            final_j: f(2)?,
            final_h: f(3)?,
            max_p_norm: f(4)?,
            steps: row.get(5).and_then(|s| s.parse().ok()).ok_or_else(bad)?,
        });
    }
    Ok(out)
}

/// A named `(t, value)` curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];
const MAX_POINTS: usize = 1500;

/// Writes a line plot as SVG with axes, ticks and a legend.
pub fn write_plot(series: &[Series], path: &Path, log_y: bool, title: &str, y_label: &str) -> Result<()> {
    fs::write(path, render_plot(series, log_y, title, y_label)?)?;
    Ok(())
}

pub fn render_plot(series: &[Series], log_y: bool, title: &str, y_label: &str) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(Error::InvalidInput("nothing to plot".into()));
    }
    if log_y && series.iter().flat_map(|s| &s.points).any(|p| !(p.1 > 0.0)) {
        return Err(Error::NonPositiveForLog);
    }
    let ty = |v: f64| if log_y { v.log10() } else { v };
    let pts = series.iter().flat_map(|s| &s.points);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        let y = ty(y);
        if x.is_finite() && y.is_finite() {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    if !x0.is_finite() {
        return Err(Error::InvalidInput("no finite points to plot".into()));
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if log_y {
        y0 = y0.floor();
        y1 = y1.ceil();
    }
    if y1 == y0 {
        y0 -= 0.5;
        y1 += 0.5;
    }

    let (w, h) = (760.0, 480.0);
    let (left, right, top, bottom) = (80.0, 190.0, 40.0, 55.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, left + pw / 2.0, escape(title));
    let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);

    for k in 0..=5 {
        let x = x0 + (x1 - x0) * k as f64 / 5.0;
        let px = sx(x);
        let _ = writeln!(s, r#"<line x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}" stroke="black"/>"#, top + ph, top + ph + 5.0);
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#, top + ph + 19.0, tick_label(x));
    }
    let y_ticks: Vec<f64> = if log_y {
        let step = ((y1 - y0) / 8.0).ceil().max(1.0);
        let mut v = Vec::new();
        let mut e = y0;
        while e <= y1 + 1e-9 {
            v.push(e);
            e += step;
        }
        v
    } else {
        (0..=5).map(|k| y0 + (y1 - y0) * k as f64 / 5.0).collect()
    };
    for &y in &y_ticks {
        let py = sy(y);
        let label = if log_y { format!("1e{}", y as i64) } else { tick_label(y) };
        let _ = writeln!(s, r#"<line x1="{}" y1="{py:.2}" x2="{left}" y2="{py:.2}" stroke="black"/>"#, left - 5.0);
        let _ = writeln!(s, r##"<line x1="{left}" y1="{py:.2}" x2="{}" y2="{py:.2}" stroke="#dddddd"/>"##, left + pw);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#, left - 8.0, py + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">t</text>"#, left + pw / 2.0, h - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        escape(y_label)
    );

    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let stride = ser.points.len().div_ceil(MAX_POINTS).max(1);
        let mut poly = String::new();
        for (k, &(x, y)) in ser.points.iter().enumerate() {
            if k % stride != 0 && k + 1 != ser.points.len() {
                continue;
            }
            let y = ty(y);
            if x.is_finite() && y.is_finite() {
                let _ = write!(poly, "{:.2},{:.2} ", sx(x), sy(y));
            }
        }
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, poly.trim_end());
        let ly = top + 10.0 + 18.0 * i as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 22.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 28.0, ly + 4.0, escape(&ser.name));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn tick_label(v: f64) -> String {
    if v == 0.0 || (1e-2..1e4).contains(&v.abs()) {
        format!("{}", (v * 1000.0).round() / 1000.0)
    } else {
        format!("{v:.1e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
