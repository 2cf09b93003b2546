//! Minimal SVG line plots.
//!
//! Output depends only on the input: coordinates are printed at fixed
//! precision and nothing time- or environment-dependent is embedded.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{invalid_input, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Curve {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self { label: label.into(), points }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotLabels {
    pub title: String,
    pub x: String,
    pub y: String,
    /// Free text stored in the SVG `<desc>` element, e.g. the run configuration.
    pub description: Option<String>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 48.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = (hi - lo) * 0.05;
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        (lo - pad, hi + pad)
    }
}

/// Renders the curves, plus a dashed horizontal rule at `bound_line` when given.
pub fn render_svg(series: &[Curve], bound_line: Option<f64>, labels: &PlotLabels) -> Result<String> {
    if series.is_empty() || series.iter().all(|c| c.points.is_empty()) {
        return Err(invalid_input("plot needs at least one non-empty curve"));
    }
    if series.iter().flat_map(|c| &c.points).any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(invalid_input("plot values must be finite"));
    }
    if bound_line.is_some_and(|b| !b.is_finite()) {
        return Err(invalid_input("bound line must be finite"));
    }
    let pts = series.iter().flat_map(|c| &c.points);
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    if let Some(b) = bound_line {
        y_lo = y_lo.min(b);
        y_hi = y_hi.max(b);
    }
    let (x_lo, x_hi) = if x_hi > x_lo { (x_lo, x_hi) } else { padded(x_lo, x_hi) };
    let (y_lo, y_hi) = padded(y_lo, y_hi);
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| MARGIN_T + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, "<title>{}</title>", escape(&labels.title));
    if let Some(d) = &labels.description {
        let _ = writeln!(s, "<desc>{}</desc>", escape(d));
    }
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x_lo + f * (x_hi - x_lo), y_lo + f * (y_hi - y_lo));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            MARGIN_T + plot_h,
            MARGIN_T + plot_h + 5.0,
            MARGIN_T + plot_h + 18.0,
            tick(xv)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{MARGIN_L}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN_L - 5.0,
            MARGIN_L - 8.0,
            py + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(&labels.title));
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, MARGIN_L + plot_w / 2.0, HEIGHT - 10.0, escape(&labels.x));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        escape(&labels.y)
    );
    if let Some(b) = bound_line {
        let _ = writeln!(
            s,
            r#"<line class="bound" x1="{MARGIN_L}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="6 4"/>"#,
            sy(b),
            MARGIN_L + plot_w,
            sy(b)
        );
    }
    for (i, c) in series.iter().enumerate() {
        if c.points.is_empty() {
            continue;
        }
        let colour = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = c.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#, coords.join(" "));
        let ly = MARGIN_T + 16.0 + 16.0 * i as f64;
        let _ = writeln!(s, r#"<text x="{:.2}" y="{ly:.2}" fill="{colour}" text-anchor="end">{}</text>"#, MARGIN_L + plot_w - 8.0, escape(&c.label));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn tick(v: f64) -> String {
    let t = format!("{v:.3}");
    if t == "-0.000" {
        "0.000".into()
    } else {
        t
    }
}

pub fn emit_svg_plot(series: &[Curve], bound_line: Option<f64>, labels: &PlotLabels, path: &Path) -> Result<()> {
    let svg = render_svg(series, bound_line, labels)?;
    std::fs::write(path, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn k_curve() -> Curve {
        Curve::new("K", (0..50).map(|i| (i as f64 * 0.1, 1.0 - (i as f64 * 0.1).sin())).collect())
    }

    #[test]
    fn one_curve_one_polyline() {
        let svg = render_svg(&[k_curve()], None, &PlotLabels::default()).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("stroke-dasharray").count(), 0);
    }

    #[test]
    fn bound_gives_exactly_one_dashed_rule() {
        let svg = render_svg(&[k_curve(), k_curve()], Some(1.0), &PlotLabels::default()).unwrap();
        assert_eq!(svg.matches("stroke-dasharray").count(), 1);
        assert_eq!(svg.matches("<polyline").count(), 2);
    }

    #[test]
    fn output_is_deterministic_and_escaped() {
        let dir = tempfile::tempdir().unwrap();
        let labels = PlotLabels { title: "K <tau>".into(), x: "tau".into(), y: "K".into(), description: Some(r#"{"a":"b&c"}"#.into()) };
        let (a, b) = (dir.path().join("a.svg"), dir.path().join("b.svg"));
        emit_svg_plot(&[k_curve()], Some(1.0), &labels, &a).unwrap();
        emit_svg_plot(&[k_curve()], Some(1.0), &labels, &b).unwrap();
        let (sa, sb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_eq!(sa, sb);
        let text = String::from_utf8(sa).unwrap();
        assert!(text.contains("K &lt;tau&gt;"));
        assert!(text.contains("b&amp;c"));
    }

    #[test]
    fn bad_input_is_rejected() {
        assert!(matches!(render_svg(&[], Some(1.0), &PlotLabels::default()), Err(Error::InvalidInput(_))));
        assert!(render_svg(&[Curve::new("e", vec![])], None, &PlotLabels::default()).is_err());
        assert!(render_svg(&[Curve::new("n", vec![(0.0, f64::NAN)])], None, &PlotLabels::default()).is_err());
        // A single point still renders.
        assert!(render_svg(&[Curve::new("p", vec![(1.0, 1.0)])], None, &PlotLabels::default()).is_ok());
    }
}
