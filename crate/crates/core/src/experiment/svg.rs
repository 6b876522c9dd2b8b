//! Minimal SVG rendering for matrices and curves.

use std::fmt::Write;

const W: f64 = 480.0;
const H: f64 = 320.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#2ca02c", "#7f7f7f", "#d62728"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Linear white-to-blue ramp.
fn color(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let c = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", c(247.0, 8.0), c(251.0, 48.0), c(255.0, 107.0))
}

/// One `<rect class="cell">` per entry, annotated with its value.
/// Rows are training sets, columns test sets.
pub fn heatmap_svg(title: &str, names: &[String], m: &[Vec<f64>]) -> String {
    let n = names.len().max(1);
    let cell = 64.0;
    let left = 96.0;
    let top = 56.0;
    let width = left + cell * n as f64 + 16.0;
    let height = top + cell * n as f64 + 16.0;
    let (lo, hi) = m.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" font-size="13">{}</text>"#, left, escape(title));
    for (j, name) in names.iter().enumerate() {
        let x = left + cell * (j as f64 + 0.5);
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">{}</text>"#, top - 8.0, escape(name));
    }
    for (i, row) in m.iter().enumerate() {
        let y = top + cell * i as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, left - 6.0, y + cell / 2.0 + 4.0, escape(&names[i]));
        for (j, v) in row.iter().enumerate() {
            let x = left + cell * j as f64;
            let t = (v - lo) / span;
            let _ = writeln!(s, r#"<rect class="cell" x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{}"/>"#, color(t));
            let ink = if t > 0.55 { "#ffffff" } else { "#000000" };
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle" fill="{ink}">{v:.3}</text>"#,
                x + cell / 2.0,
                y + cell / 2.0 + 4.0
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

pub struct Series<'a> {
    pub label: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

/// Polyline per series on shared axes; `x` is assumed to lie in `[0, 1]`.
pub fn line_plot_svg(title: &str, y_label: &str, series: &[Series]) -> String {
    let (mut lo, mut hi) = series.iter().flat_map(|s| s.y.iter()).filter(|v| v.is_finite()).fold(
        (f64::INFINITY, f64::NEG_INFINITY),
        |(a, b), v| (a.min(*v), b.max(*v)),
    );
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    lo = lo.min(0.0);
    if hi <= lo {
        hi = lo + 1.0;
    }
    let px = |x: f64| MARGIN + x * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y - lo) / (hi - lo) * (H - 2.0 * MARGIN);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="20" font-size="13">{}</text>"#, escape(title));
    let _ = writeln!(
        s,
        r##"<path d="M{a} {b} L{a} {c} M{a} {b} L{d} {b}" stroke="#000000" fill="none"/>"##,
        a = px(0.0),
        b = py(lo),
        c = py(hi),
        d = px(1.0)
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">retained fraction</text>"#, px(0.5), H - 12.0);
    let _ = writeln!(s, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{}</text>"#, py((lo + hi) / 2.0), py((lo + hi) / 2.0), escape(y_label));
    for (v, label) in [(lo, lo), (hi, hi)] {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{label:.3}</text>"#, px(0.0) - 4.0, py(v) + 4.0);
    }
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = ser
            .x
            .iter()
            .zip(ser.y)
            .filter(|(_, y)| y.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
            .collect();
        let _ = writeln!(s, r#"<polyline class="series" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let ly = MARGIN + 14.0 * k as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#, W - MARGIN - 80.0, escape(ser.label));
    }
    s.push_str("</svg>\n");
    s
}
