//! Deterministic SVG figures. Coordinates are printed with two decimals so
//! identical inputs give byte-identical files.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::analysis::{Results, SeriesResult};
use crate::runner::{Measure, RateSeries};
use crate::stats::{FitClass, MumEstimate};
use crate::strategy::Strategy;

const W: f64 = 480.0;
const H: f64 = 320.0;
const LEFT: f64 = 56.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 44.0;
const X_MIN: f64 = -0.25;
const X_MAX: f64 = 5.25;

/// Four display bands along the modulation axis, separated by three
/// increasing boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Zones {
    pub boundaries: [f64; 3],
    #[serde(default = "default_zone_labels")]
    pub labels: [String; 4],
}

fn default_zone_labels() -> [String; 4] {
    ["typical", "opaque", "coded", "Algospeak"].map(String::from)
}

const ZONE_FILLS: [&str; 4] = ["#f4f8fb", "#eaf1f6", "#dfe9f1", "#d4e2ec"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Canvas {
    out: String,
}

impl Canvas {
    fn new(width: f64, height: f64, title: &str, manifest: &str) -> Self {
        let mut out = String::new();
        writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
        )
        .unwrap();
        writeln!(out, "<!-- manifest: {manifest} -->").unwrap();
        writeln!(out, "<title>{}</title>", esc(title)).unwrap();
        writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##).unwrap();
        writeln!(
            out,
            r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
            width / 2.0,
            esc(title)
        )
        .unwrap();
        Self { out }
    }

    fn push(&mut self, s: String) {
        self.out.push_str(&s);
        self.out.push('\n');
    }

    fn finish(mut self, manifest: &str, height: f64) -> String {
        self.push(format!(
            r##"<text x="4" y="{:.2}" font-size="8" fill="#999999">manifest {manifest}</text>"##,
            height - 4.0
        ));
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn sx(x: f64) -> f64 {
    LEFT + (x - X_MIN) / (X_MAX - X_MIN) * (W - LEFT - RIGHT)
}

fn sy(y: f64) -> f64 {
    TOP + (1.0 - y) * (H - TOP - BOTTOM)
}

fn axes(c: &mut Canvas, y_label: &str) {
    let (x0, x1, y0, y1) = (sx(X_MIN), sx(X_MAX), sy(0.0), sy(1.0));
    c.push(format!(
        r##"<path d="M{x0:.2},{y1:.2} L{x0:.2},{y0:.2} L{x1:.2},{y0:.2}" fill="none" stroke="#333333"/>"##
    ));
    for l in 0..=5 {
        let x = sx(l as f64);
        c.push(format!(
            r##"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333333"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{l}</text>"##,
            y0 + 4.0,
            y0 + 16.0
        ));
    }
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let y = sy(t);
        c.push(format!(
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="#333333"/><text x="{:.2}" y="{:.2}" text-anchor="end">{t:.2}</text>"##,
            x0 - 4.0,
            x0 - 6.0,
            y + 4.0
        ));
    }
    c.push(format!(
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">modulation level</text>"#,
        (x0 + x1) / 2.0,
        H - 14.0
    ));
    c.push(format!(
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        esc(y_label)
    ));
}

/// Observed rates, fitted sigmoid (sampled every 0.05), tau line and IMUM
/// marker. Poor fits show the points with a "poor fit" note instead of the
/// curve; censored estimates get no marker.
pub fn render_curves(
    series: &RateSeries,
    result: Option<&SeriesResult>,
    tau: f64,
    zones: Option<&Zones>,
    manifest: &str,
) -> String {
    let title = format!("{} · {} · {}", series.evaluator_id, series.measure, series.strategy.label());
    let mut c = Canvas::new(W, H, &title, manifest);
    if let Some(z) = zones {
        let mut edges = vec![X_MIN];
        edges.extend(z.boundaries.iter().map(|b| b.clamp(X_MIN, X_MAX)));
        edges.push(X_MAX);
        for i in 0..4 {
            let (a, b) = (sx(edges[i]), sx(edges[i + 1]));
            if b > a {
                c.push(format!(
                    r##"<rect x="{a:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/><text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="9" fill="#667788">{}</text>"##,
                    sy(1.0),
                    b - a,
                    sy(0.0) - sy(1.0),
                    ZONE_FILLS[i],
                    (a + b) / 2.0,
                    sy(1.0) + 10.0,
                    esc(&z.labels[i])
                ));
            }
        }
    }
    axes(&mut c, &format!("{} rate", series.measure));
    c.push(format!(
        r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#888888" stroke-dasharray="4 3"/><text x="{:.2}" y="{:.2}" text-anchor="end" fill="#888888">τ = {tau}</text>"##,
        sx(X_MIN),
        sx(X_MAX),
        sx(X_MAX),
        sy(tau) - 4.0,
        y = sy(tau)
    ));
    let fit = result.and_then(|r| r.fit.as_ref());
    match fit {
        Some(f) if f.fit_class != FitClass::Poor => {
            let mut d = String::new();
            for i in 0..=100 {
                let x = i as f64 * 0.05;
                let cmd = if i == 0 { 'M' } else { 'L' };
                write!(d, "{cmd}{:.2},{:.2} ", sx(x), sy(f.predict(x))).unwrap();
            }
            c.push(format!(
                r##"<path d="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##,
                d.trim_end()
            ));
        }
        Some(_) => c.push(format!(
            r##"<text x="{:.2}" y="{:.2}" text-anchor="middle" fill="#aa3333">poor fit</text>"##,
            sx(2.5),
            sy(0.5) - 24.0
        )),
        None => c.push(format!(
            r##"<text x="{:.2}" y="{:.2}" text-anchor="middle" fill="#aa3333">no fit</text>"##,
            sx(2.5),
            sy(0.5) - 24.0
        )),
    }
    for p in &series.points {
        c.push(format!(
            r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#d62728"/>"##,
            sx(p.level as f64),
            sy(p.rate)
        ));
    }
    if let Some(im) = result.and_then(|r| r.imum.as_ref()) {
        if im.censored {
            c.push(format!(
                r##"<text x="{:.2}" y="{:.2}" text-anchor="end" fill="#555555">IMUM censored at {:.2}</text>"##,
                sx(X_MAX),
                sy(1.0) + 24.0,
                im.value
            ));
        } else if fit.is_some_and(|f| f.fit_class != FitClass::Poor) {
            let x = sx(im.value.clamp(X_MIN, X_MAX));
            c.push(format!(
                r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#2ca02c" stroke-dasharray="2 2"/><text x="{x:.2}" y="{:.2}" text-anchor="middle" fill="#2ca02c">IMUM {:.2}</text>"##,
                sy(0.0),
                sy(1.0),
                sy(1.0) - 4.0,
                im.value
            ));
        }
    }
    c.finish(manifest, H)
}

fn heat_color(v: f64) -> String {
    // White at 0 (or below) to dark blue at 1.
    let t = v.clamp(0.0, 1.0);
    let r = (255.0 - t * 205.0).round() as u8;
    let g = (255.0 - t * 155.0).round() as u8;
    let b = (255.0 - t * 75.0).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Strategies × evaluators grid of adjusted R².
pub fn render_heatmap(results: &Results, measure: Measure, manifest: &str) -> String {
    let evals = results.evaluators();
    let cell_w = 84.0;
    let cell_h = 26.0;
    let left = 110.0;
    let top = 60.0;
    let width = left + cell_w * evals.len().max(1) as f64 + 20.0;
    let height = top + cell_h * 7.0 + 40.0;
    let mut c = Canvas::new(width, height, &format!("adjusted R² · {measure}"), manifest);
    for (j, e) in evals.iter().enumerate() {
        c.push(format!(
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            left + cell_w * (j as f64 + 0.5),
            top - 8.0,
            esc(e)
        ));
    }
    for (i, s) in Strategy::ALL.iter().enumerate() {
        let y = top + cell_h * i as f64;
        c.push(format!(
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 6.0,
            y + cell_h / 2.0 + 4.0,
            esc(s.label())
        ));
        for (j, e) in evals.iter().enumerate() {
            let x = left + cell_w * j as f64;
            let r = results.get(measure, e, *s);
            let (fill, label) = match r.and_then(|r| Some((r.fit.as_ref()?, r.spearman.as_ref()?))) {
                Some((f, sp)) => (
                    heat_color(f.adj_r2),
                    format!("{:.2}{}", f.adj_r2, if sp.significant { "*" } else { "" }),
                ),
                None => ("#eeeeee".to_string(), "–".to_string()),
            };
            c.push(format!(
                r##"<rect x="{x:.2}" y="{y:.2}" width="{cell_w:.2}" height="{cell_h:.2}" fill="{fill}" stroke="#ffffff"/><text x="{:.2}" y="{:.2}" text-anchor="middle">{label}</text>"##,
                x + cell_w / 2.0,
                y + cell_h / 2.0 + 4.0
            ));
        }
    }
    c.push(format!(
        r##"<text x="{left:.2}" y="{:.2}" font-size="9" fill="#555555">* Spearman p &lt; 0.05</text>"##,
        top + cell_h * 7.0 + 16.0
    ));
    c.finish(manifest, height)
}

/// Per-model IMUM markers with the across-models MUM as a line. Censored
/// inputs are drawn hollow.
pub fn render_imum_chart(m: &MumEstimate, manifest: &str) -> String {
    let n = m.inputs.len().max(1);
    let row_h = 22.0;
    let left = 110.0;
    let top = 50.0;
    let plot_w = 300.0;
    let width = left + plot_w + 30.0;
    let height = top + row_h * n as f64 + 60.0;
    let hi = m
        .inputs
        .iter()
        .map(|e| e.value)
        .fold(6.0f64, f64::max)
        .ceil();
    let lo = m.inputs.iter().map(|e| e.value).fold(0.0f64, f64::min).floor();
    let px = |v: f64| left + (v - lo) / (hi - lo) * plot_w;
    let title = format!("IMUM · {} · {}", m.measure, m.strategy.label());
    let mut c = Canvas::new(width, height, &title, manifest);
    let axis_y = top + row_h * n as f64 + 6.0;
    c.push(format!(
        r##"<line x1="{left:.2}" y1="{axis_y:.2}" x2="{:.2}" y2="{axis_y:.2}" stroke="#333333"/>"##,
        left + plot_w
    ));
    let mut t = lo;
    while t <= hi + 1e-9 {
        c.push(format!(
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{t:.0}</text>"#,
            px(t),
            axis_y + 14.0
        ));
        t += 1.0;
    }
    for (i, e) in m.inputs.iter().enumerate() {
        let y = top + row_h * (i as f64 + 0.5);
        let fill = if e.censored { "none" } else { "#1f77b4" };
        c.push(format!(
            r##"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text><circle cx="{:.2}" cy="{y:.2}" r="5" fill="{fill}" stroke="#1f77b4" stroke-width="1.5"/>"##,
            left - 6.0,
            y + 4.0,
            esc(e.base_id.as_deref().unwrap_or(&e.evaluator_id)),
            px(e.value)
        ));
    }
    let x = px(m.value);
    c.push(format!(
        r##"<line x1="{x:.2}" y1="{top:.2}" x2="{x:.2}" y2="{axis_y:.2}" stroke="#d62728" stroke-width="2"/><text x="{x:.2}" y="{:.2}" text-anchor="middle" fill="#d62728">MUM {:.2}</text>"##,
        top - 6.0,
        m.value
    ));
    if m.censored_count > 0 {
        c.push(format!(
            r##"<text x="{left:.2}" y="{:.2}" font-size="9" fill="#555555">hollow: censored ({} of {})</text>"##,
            axis_y + 30.0,
            m.censored_count,
            m.inputs.len()
        ));
    }
    c.finish(manifest, height)
}
