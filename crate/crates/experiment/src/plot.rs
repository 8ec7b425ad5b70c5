//! SVG line charts of study reports.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{file_error, Result};
use crate::report::{Outcome, Report, Resolution};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotMetric {
    /// One line per (resolution, observer) with confidence-interval bars.
    Auc,
    /// One line per resolution.
    Mse,
    Psnr,
    Ssim,
}

impl PlotMetric {
    fn label(self) -> &'static str {
        match self {
            PlotMetric::Auc => "AUC",
            PlotMetric::Mse => "MSE",
            PlotMetric::Psnr => "PSNR (dB)",
            PlotMetric::Ssim => "SSIM",
        }
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

/// A plotted point: x, y and an optional error bar.
type Point = (f64, f64, Option<(f64, f64)>);

struct Series {
    label: String,
    points: Vec<Point>,
}

/// Groups rows into series in order of first appearance. Rows sharing a
/// series and an x value (repeats with other seeds) are averaged.
fn collect_series(report: &Report, metric: PlotMetric) -> Vec<Series> {
    let mut keys: Vec<(Resolution, String)> = Vec::new();
    let mut sums: Vec<Vec<(f64, f64, f64, f64, usize)>> = Vec::new();
    for row in &report.rows {
        let value = match metric {
            PlotMetric::Auc => match &row.outcome {
                Outcome::Auc { auc, ci_lo, ci_hi } => Some((*auc, *ci_lo, *ci_hi)),
                Outcome::Failed(_) => None,
            },
            PlotMetric::Mse => row.iq.map(|q| (q.mse, q.mse, q.mse)),
            PlotMetric::Psnr => row.iq.map(|q| (q.psnr, q.psnr, q.psnr)),
            PlotMetric::Ssim => row.iq.map(|q| (q.ssim, q.ssim, q.ssim)),
        };
        let Some((y, lo, hi)) = value.filter(|v| v.0.is_finite()) else {
            continue;
        };
        let key = match metric {
            PlotMetric::Auc => (row.resolution, row.observer.clone()),
            _ => (row.resolution, String::new()),
        };
        let k = match keys.iter().position(|existing| *existing == key) {
            Some(k) => k,
            None => {
                keys.push(key);
                sums.push(Vec::new());
                keys.len() - 1
            }
        };
        match sums[k].iter_mut().find(|p| p.0 == row.sweep_value) {
            Some(p) => {
                p.1 += y;
                p.2 += lo;
                p.3 += hi;
                p.4 += 1;
            }
            None => sums[k].push((row.sweep_value, y, lo, hi, 1)),
        }
    }
    keys.into_iter()
        .zip(sums)
        .map(|((res, obs), mut pts)| {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let points = pts
                .into_iter()
                .map(|(x, y, lo, hi, n)| {
                    let n = n as f64;
                    let bar = (metric == PlotMetric::Auc).then_some((lo / n, hi / n));
                    (x, y / n, bar)
                })
                .collect();
            let label = if obs.is_empty() {
                res.to_string()
            } else {
                format!("{res} {obs}")
            };
            Series { label, points }
        })
        .collect()
}

fn padded_range(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    let span = hi - lo;
    if span <= 0.0 {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return (lo - pad, hi + pad);
    }
    (lo - 0.05 * span, hi + 0.05 * span)
}

fn tick_label(v: f64) -> String {
    if v == 0.0 || (1e-3..1e4).contains(&v.abs()) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Renders the chart as an SVG document.
pub fn render_svg(report: &Report, metric: PlotMetric, title: &str, x_label: &str) -> String {
    let series = collect_series(report, metric);
    let all: Vec<&Point> = series.iter().flat_map(|s| &s.points).collect();
    let (x0, x1) = padded_range(
        all.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
        all.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
    );
    let low = |p: &&Point| p.2.map_or(p.1, |b| b.0);
    let high = |p: &&Point| p.2.map_or(p.1, |b| b.1);
    let (mut y0, mut y1) = padded_range(
        all.iter().map(low).fold(f64::INFINITY, f64::min),
        all.iter().map(high).fold(f64::NEG_INFINITY, f64::max),
    );
    if metric == PlotMetric::Auc {
        y0 = y0.max(0.0);
        y1 = y1.min(1.0);
    }
    let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );

    for i in 0..=5 {
        let y = y0 + (y1 - y0) * i as f64 / 5.0;
        let py = sy(y);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            py + 4.0,
            tick_label(y)
        );
    }
    let mut xs: Vec<f64> = all.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() > 12 {
        xs = (0..=6).map(|i| x0 + (x1 - x0) * i as f64 / 6.0).collect();
    }
    for x in xs {
        let px = sx(x);
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0,
            tick_label(x)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 18.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        metric.label()
    );

    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        for p in &s.points {
            let (px, py) = (sx(p.0), sy(p.1));
            let _ = writeln!(
                svg,
                r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{color}"/>"#
            );
            if let Some((lo, hi)) = p.2 {
                let (a, b) = (sy(lo.max(y0)), sy(hi.min(y1)));
                let _ = writeln!(
                    svg,
                    r#"<path class="error-bar" d="M{px:.2},{a:.2}V{b:.2}M{:.2},{a:.2}h8M{:.2},{b:.2}h8" stroke="{color}"/>"#,
                    px - 4.0,
                    px - 4.0
                );
            }
        }
        let ly = TOP + 10.0 + 18.0 * k as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn emit_plot(
    report: &Report,
    metric: PlotMetric,
    title: &str,
    x_label: &str,
    path: &Path,
) -> Result<()> {
    std::fs::write(path, render_svg(report, metric, title, x_label)).map_err(file_error(path))
}
