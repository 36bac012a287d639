//! Minimal static SVG output.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Polylines over a shared 1-based x axis.
pub fn line_plot(title: &str, x_label: &str, series: &[(String, Vec<f64>)]) -> String {
    let n = series.iter().map(|s| s.1.len()).max().unwrap_or(0).max(2);
    let ymax = series
        .iter()
        .flat_map(|s| s.1.iter().copied())
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let x = |k: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * k as f64 / (n - 1) as f64;
    let y = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * v / ymax;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<line x1="{MARGIN}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{b}" stroke="black"/>"#,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    for k in 0..n {
        let _ = writeln!(out, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, x(k), HEIGHT - MARGIN + 14.0, k + 1);
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 8.0, escape(x_label));
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, MARGIN - 4.0, MARGIN + 4.0, ymax);
    for (i, (name, values)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = values.iter().enumerate().map(|(k, v)| format!("{:.1},{:.1}", x(k), y(*v))).collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"><title>{}</title></polyline>"#,
            pts.join(" "),
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Grayscale heatmap of values in [0, 1].
pub fn heatmap(title: &str, rows: &[String], cols: &[String], value: impl Fn(usize, usize) -> f64) -> String {
    let cell = 28.0;
    let left = 10.0 + 7.0 * rows.iter().map(|r| r.len()).max().unwrap_or(1) as f64;
    let top = 40.0 + 7.0 * cols.iter().map(|c| c.len()).max().unwrap_or(1) as f64;
    let w = left + cell * cols.len() as f64 + 10.0;
    let h = top + cell * rows.len() as f64 + 10.0;
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="10">"#);
    let _ = writeln!(out, r#"<text x="6" y="16" font-size="13">{}</text>"#, escape(title));
    for (j, c) in cols.iter().enumerate() {
        let cx = left + cell * (j as f64 + 0.5);
        let _ = writeln!(out, r#"<text x="{cx:.1}" y="{:.1}" transform="rotate(-90 {cx:.1} {:.1})">{}</text>"#, top - 4.0, top - 4.0, escape(c));
    }
    for (i, r) in rows.iter().enumerate() {
        let ry = top + cell * i as f64;
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, left - 4.0, ry + cell * 0.65, escape(r));
        for j in 0..cols.len() {
            let v = value(i, j).clamp(0.0, 1.0);
            let g = (255.0 * (1.0 - v)).round() as u8;
            let _ = writeln!(
                out,
                r#"<rect x="{:.1}" y="{ry:.1}" width="{cell}" height="{cell}" fill="rgb({g},{g},{g})" stroke="white"><title>{v:.4}</title></rect>"#,
                left + cell * j as f64
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
