use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 150.0, 40.0, 50.0); // left right top bottom
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Line chart with markers, five ticks per axis and a legend on the right.
pub fn render_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (left, right, top, bottom) = MARGIN;
    let (pw, ph) = (WIDTH - left - right, HEIGHT - top - bottom);
    let (x0, x1) = extent(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = extent(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let sx = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + ph - (y - y0) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        left + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let (x, y) = (sx(xv), sy(yv));
        let _ = writeln!(
            svg,
            r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/><text x="{x}" y="{}" text-anchor="middle">{xv:.4}</text>"#,
            top + ph,
            top + ph + 5.0,
            top + ph + 18.0
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{left}" y1="{y}" x2="{}" y2="{y}" stroke="#ddd"/><text x="{}" y="{}" text-anchor="end">{yv:.4}</text>"##,
            left + pw,
            left - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        // Markers only when they stay readable.
        if s.points.len() <= 60 {
            for &(x, y) in &s.points {
                let _ = writeln!(
                    svg,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                    sx(x),
                    sy(y)
                );
            }
        }
        let ly = top + 10.0 + 18.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{}" y="{}" width="12" height="4" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
            WIDTH - right + 12.0,
            ly - 4.0,
            WIDTH - right + 30.0,
            ly + 1.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

type Row = BTreeMap<String, String>;

/// Columns read as strings keyed by header name.
fn table(text: &str) -> Result<(Vec<String>, Vec<Row>)> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        rows.push(
            headers
                .iter()
                .cloned()
                .zip(record.iter().map(str::to_string))
                .collect(),
        );
    }
    Ok((headers, rows))
}

fn number(row: &BTreeMap<String, String>, key: &str) -> Result<f64> {
    row[key]
        .parse()
        .map_err(|_| Error::Format(format!("column {key}: {:?} is not a number", row[key])))
}

/// Groups rows by `decoder` and `L` into series of `(x, y)`.
fn grouped(rows: &[BTreeMap<String, String>], x: &str, y: &str) -> Result<Vec<Series>> {
    let mut groups: BTreeMap<(String, usize), Vec<(f64, f64)>> = BTreeMap::new();
    for row in rows {
        let l = number(row, "L")? as usize;
        groups
            .entry((row["decoder"].clone(), l))
            .or_default()
            .push((number(row, x)?, number(row, y)?));
    }
    Ok(groups
        .into_iter()
        .map(|((decoder, l), mut points)| {
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series {
                label: format!("{decoder} L={l}"),
                points,
            }
        })
        .collect())
}

/// Renders a metrics, loss-trace or trainability CSV, recognized by header.
pub fn plot_csv(text: &str) -> Result<String> {
    let (headers, rows) = table(text)?;
    let has = |names: &[&str]| names.iter().all(|n| headers.iter().any(|h| h == n));
    if has(&["decoder", "L", "p", "accuracy"]) {
        Ok(render_svg(
            "Logical accuracy",
            "physical error rate p",
            "accuracy",
            &grouped(&rows, "p", "accuracy")?,
        ))
    } else if has(&["step", "loss"]) {
        let series = headers
            .iter()
            .filter(|h| *h != "step")
            .map(|col| {
                let points = rows
                    .iter()
                    .map(|r| Ok((number(r, "step")?, number(r, col)?)))
                    .collect::<Result<_>>()?;
                Ok(Series {
                    label: col.clone(),
                    points,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(render_svg("Training loss", "step", "loss", &series))
    } else if has(&["decoder", "L", "p_train", "trainability"]) {
        let series = grouped(&rows, "p_train", "trainability")?;
        Ok(render_svg(
            "Trainability",
            "training error rate",
            "relative loss decrease",
            &series,
        ))
    } else {
        Err(Error::Unsupported(format!(
            "no plot for columns {headers:?}"
        )))
    }
}
