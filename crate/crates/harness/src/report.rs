//! Text table, plot CSVs and a small SVG line chart.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use anyhow::{bail, Context, Result};

use crate::sweep::{Stat, SweepRow};

const TABLE_HEADER: [&str; 6] = ["S", "m", "T", "kappa_H", "|D|", "||W_T-W_0||_F"];

fn cell(s: &Stat, decimals: usize) -> String {
    format!(
        "{:.d$}-{:.d$}; **{:.d$}**",
        s.min,
        s.max,
        s.mean,
        d = decimals
    )
}

/// One line per row, cells rendered as `min-max; **mean**` (mean in bold).
pub fn emit_table(rows: &[SweepRow]) -> String {
    let mut lines: Vec<[String; 6]> = vec![TABLE_HEADER.map(String::from)];
    for r in rows {
        lines.push([
            r.s.to_string(),
            r.m.to_string(),
            cell(&r.t, 0),
            cell(&r.kappa_h, 2),
            cell(&r.d_count, 0),
            cell(&r.w_displacement, 2),
        ]);
    }
    let mut widths = [0usize; 6];
    for l in &lines {
        for (w, c) in widths.iter_mut().zip(l) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    for l in &lines {
        let padded: Vec<String> = l
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        out.push_str(padded.join(" | ").trim_end());
        out.push('\n');
    }
    out
}

pub const PLOT_HEADER: &str = "m,kappa_H_mean,kappa_D_mean,kappa_W_mean,theory_kappa_D";

/// `(m / (n S))^(1/3)`.
pub fn theory_kappa_d(m: usize, n: usize, s: usize) -> f64 {
    (m as f64 / (n * s) as f64).cbrt()
}

/// One CSV per width, rows ordered by `m`.
pub fn emit_plot_data(rows: &[SweepRow], n: usize) -> BTreeMap<usize, String> {
    let mut by_s: BTreeMap<usize, Vec<&SweepRow>> = BTreeMap::new();
    for r in rows {
        by_s.entry(r.s).or_default().push(r);
    }
    by_s.into_iter()
        .map(|(s, mut rs)| {
            rs.sort_by_key(|r| r.m);
            let mut csv = format!("{PLOT_HEADER}\n");
            for r in rs {
                writeln!(
                    csv,
                    "{},{},{},{},{}",
                    r.m,
                    r.kappa_h.mean,
                    r.kappa_d_mean,
                    r.kappa_w_mean,
                    theory_kappa_d(r.m, n, s)
                )
                .unwrap();
            }
            (s, csv)
        })
        .collect()
}

struct Series {
    name: &'static str,
    color: &'static str,
    dashed: bool,
    points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;

fn parse_plot_csv(text: &str) -> Result<Vec<Series>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = rdr.headers().context("reading plot header")?.clone();
    let expected: Vec<&str> = PLOT_HEADER.split(',').collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        bail!("plot CSV header must be {PLOT_HEADER:?}");
    }
    let mut series = vec![
        Series { name: "kappa_H", color: "#1f77b4", dashed: false, points: vec![] },
        Series { name: "kappa_D", color: "#d62728", dashed: false, points: vec![] },
        Series { name: "kappa_W", color: "#2ca02c", dashed: false, points: vec![] },
        Series { name: "theory kappa_D", color: "#555555", dashed: true, points: vec![] },
    ];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("plot CSV row {}", line + 2))?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("non-numeric value in plot CSV row {}", line + 2))?;
        for (k, s) in series.iter_mut().enumerate() {
            if vals[k + 1].is_finite() {
                s.points.push((vals[0], vals[k + 1]));
            }
        }
    }
    Ok(series)
}

/// Renders a plot CSV (see [`PLOT_HEADER`]) as an SVG line chart with the
/// theory curve dashed. Output is a pure function of the input text.
pub fn emit_svg(plot_csv: &str) -> Result<String> {
    let series = parse_plot_csv(plot_csv)?;
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    let (mut x0, mut x1) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    if all.is_empty() {
        (x0, x1) = (0.0, 1.0);
    } else if x0 == x1 {
        (x0, x1) = (x0 - 1.0, x1 + 1.0);
    }
    let mut y1 = all.iter().fold(0.0f64, |a, p| a.max(p.1));
    if y1 <= 0.0 {
        y1 = 1.0;
    }
    let y0 = all.iter().fold(0.0f64, |a, p| a.min(p.1));
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    )?;
    writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#)?;
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    writeln!(svg, r#"<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>"#)?;
    writeln!(svg, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>"#)?;
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let (tx, ty) = (px(xv), py(yv));
        writeln!(svg, r#"<text x="{tx:.2}" y="{:.2}" text-anchor="middle">{xv:.0}</text>"#, bottom + 16.0)?;
        writeln!(svg, r#"<text x="{:.2}" y="{ty:.2}" text-anchor="end">{yv:.3}</text>"#, left - 6.0)?;
    }
    writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">m</text>"#, WIDTH / 2.0, HEIGHT - 18.0)?;
    writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">value</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    )?;
    for (k, s) in series.iter().enumerate() {
        let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        if s.points.len() >= 2 {
            let pts: Vec<String> =
                s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            writeln!(
                svg,
                r#"<polyline fill="none" stroke="{}" stroke-width="1.5"{dash} points="{}"/>"#,
                s.color,
                pts.join(" ")
            )?;
        } else if let Some(&(x, y)) = s.points.first() {
            writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#, px(x), py(y), s.color)?;
        }
        let ly = top + 14.0 * k as f64;
        writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{}"{dash}/>"#,
            right - 120.0,
            right - 100.0,
            s.color
        )?;
        writeln!(svg, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, right - 95.0, ly + 4.0, s.name)?;
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
