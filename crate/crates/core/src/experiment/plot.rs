use std::fmt::Write as _;

use super::tables::{p_header, GridSpec};
use crate::datasets::Task;
use crate::error::Result;
use crate::evaluation::{AggregatedCell, Variant};

const WIDTH: f64 = 520.0;
const HEIGHT: f64 = 380.0;
const LEFT: f64 = 78.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 44.0;
const BOTTOM: f64 = 64.0;
const MARKER: f64 = 6.0;

fn colour(v: Variant) -> &'static str {
    match v {
        Variant::Standard => "#ff7f0e",
        Variant::Sidecar => "#1f77b4",
    }
}

fn label(v: Variant) -> &'static str {
    match v {
        Variant::Standard => "Standard CBM",
        Variant::Sidecar => "Sidecar CBM",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Cross for the standard model, plus for the sidecar.
fn marker(out: &mut String, v: Variant, x: f64, y: f64) {
    let c = colour(v);
    let m = MARKER;
    let (a, b) = match v {
        Variant::Standard => ((x - m, y - m, x + m, y + m), (x - m, y + m, x + m, y - m)),
        Variant::Sidecar => ((x - m, y, x + m, y), (x, y - m, x, y + m)),
    };
    for (x1, y1, x2, y2) in [a, b] {
        let _ = writeln!(
            out,
            r#"  <line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{c}" stroke-width="2"/>"#
        );
    }
}

/// Mean target accuracy against missingness with standard-deviation error
/// bars, one series per variant.
pub fn render_accuracy_svg(spec: &GridSpec, cells: &[AggregatedCell], task: Task) -> Result<String> {
    let sub = GridSpec {
        datasets: vec![task],
        ..spec.clone()
    };
    sub.require_complete(cells)?;
    let mut points: Vec<(Variant, f64, f64, f64)> = Vec::new();
    for &v in &sub.variants {
        for &p in &sub.p_grid {
            let c = sub.find(cells, task, p, v).expect("checked complete");
            points.push((v, p, c.target_accuracy.mean, c.target_accuracy.std));
        }
    }

    let (p_lo, p_hi) = sub
        .p_grid
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &p| (a.min(p), b.max(p)));
    let p_pad = ((p_hi - p_lo) * 0.08).max(0.05);
    let (x_lo, x_hi) = (p_lo - p_pad, p_hi + p_pad);
    let (mut y_lo, mut y_hi) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(_, _, m, s)| (a.min(m - s), b.max(m + s)));
    let span = (y_hi - y_lo).max(0.01);
    y_lo = (y_lo - 0.1 * span).max(0.0);
    y_hi = (y_hi + 0.1 * span).min(1.0);
    if y_hi <= y_lo {
        y_lo = (y_hi - 0.01).max(0.0);
        y_hi = y_lo + 0.01;
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |p: f64| LEFT + (p - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |a: f64| TOP + (y_hi - a) / (y_hi - y_lo) * plot_h;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
  <rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>
  <text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>
  <rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#,
        LEFT + plot_w / 2.0,
        escape(task.display_name())
    );
    for &p in &sub.p_grid {
        let x = sx(p);
        let _ = writeln!(
            out,
            r#"  <line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>
  <text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 19.0,
            p_header(p)
        );
    }
    for i in 0..=5 {
        let a = y_lo + (y_hi - y_lo) * i as f64 / 5.0;
        let y = sy(a);
        let _ = writeln!(
            out,
            r##"  <line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>
  <line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>
  <text x="{:.2}" y="{:.2}" text-anchor="end">{a:.3}</text>"##,
            LEFT - 5.0,
            LEFT + plot_w,
            LEFT - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"  <text x="{:.1}" y="{:.1}" text-anchor="middle">Probability of missing concept labels</text>
  <text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">Target accuracy</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 18.0,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    for &(v, p, mean, std) in &points {
        let (x, y) = (sx(p), sy(mean));
        if std > 0.0 {
            let (y1, y2) = (sy(mean - std), sy(mean + std));
            let c = colour(v);
            let _ = writeln!(
                out,
                r#"  <line x1="{x:.2}" y1="{y1:.2}" x2="{x:.2}" y2="{y2:.2}" stroke="{c}"/>
  <line x1="{:.2}" y1="{y1:.2}" x2="{:.2}" y2="{y1:.2}" stroke="{c}"/>
  <line x1="{:.2}" y1="{y2:.2}" x2="{:.2}" y2="{y2:.2}" stroke="{c}"/>"#,
                x - 4.0,
                x + 4.0,
                x - 4.0,
                x + 4.0
            );
        }
        marker(&mut out, v, x, y);
    }
    for (i, &v) in sub.variants.iter().enumerate() {
        let y = TOP + 16.0 + 18.0 * i as f64;
        let x = LEFT + plot_w - 120.0;
        marker(&mut out, v, x, y);
        let _ = writeln!(out, r#"  <text x="{:.2}" y="{:.2}">{}</text>"#, x + 12.0, y + 4.0, label(v));
    }
    out += "</svg>\n";
    Ok(out)
}
