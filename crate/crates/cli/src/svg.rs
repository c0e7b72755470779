//! Minimal line plots as self-contained SVG.
//!
//! Fixed 800×320 viewport, y axis autoscaled to the data and annotated with
//! its min/max, at most `MAX_POINTS` vertices per series. Output depends only
//! on the input values.

use std::fmt::Write;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 320.0;
pub const MAX_POINTS: usize = 2000;

const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 40.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Every `stride`-th point plus the last one.
fn downsample(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    if points.len() <= MAX_POINTS {
        return points.to_vec();
    }
    let stride = points.len().div_ceil(MAX_POINTS - 1);
    let mut out: Vec<_> = points.iter().step_by(stride).copied().collect();
    if out.last() != points.last() {
        out.push(*points.last().expect("non-empty"));
    }
    out
}

fn bounds(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values
        .filter(|v| v.is_finite())
        .fold(None, |acc, v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
}

/// Renders `series` against a shared time axis.
pub fn line_plot(title: &str, x_label: &str, series: &[Series]) -> String {
    let all = || series.iter().flat_map(|s| s.points.iter());
    let (x_lo, x_hi) = bounds(all().map(|p| p.0)).unwrap_or((0.0, 1.0));
    let (y_min, y_max) = bounds(all().map(|p| p.1)).unwrap_or((0.0, 0.0));
    let pad = if y_max > y_min {
        0.05 * (y_max - y_min)
    } else {
        y_max.abs().max(1.0) * 0.1
    };
    let (y_lo, y_hi) = (y_min - pad, y_max + pad);
    let x_span = if x_hi > x_lo { x_hi - x_lo } else { 1.0 };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_lo) / x_span * plot_w;
    let sy = |y: f64| TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444"/>"##
    );
    if y_lo < 0.0 && y_hi > 0.0 {
        let y0 = sy(0.0);
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y0:.2}" x2="{:.2}" y2="{y0:.2}" stroke="#bbb" stroke-dasharray="4 3"/>"##,
            LEFT + plot_w
        );
    }
    for (i, ser) in series.iter().enumerate() {
        let pts = downsample(&ser.points);
        let mut path = String::with_capacity(pts.len() * 16);
        for (x, y) in pts.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
            let _ = write!(path, "{:.2},{:.2} ", sx(*x), sy(*y));
        }
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            path.trim_end()
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" fill="{color}">{}</text>"#,
            LEFT + 10.0 + 140.0 * i as f64,
            TOP + 16.0,
            escape(&ser.label)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{:.2}" text-anchor="end">max {y_max:.4e}</text>"#,
        LEFT - 4.0,
        TOP + 4.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{:.2}" text-anchor="end">min {y_min:.4e}</text>"#,
        LEFT - 4.0,
        TOP + plot_h
    );
    let _ = writeln!(
        s,
        r#"<text x="{LEFT}" y="{:.2}">{x_lo}</text>"#,
        HEIGHT - BOTTOM + 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{x_hi}</text>"#,
        LEFT + plot_w,
        HEIGHT - BOTTOM + 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 8.0,
        escape(x_label)
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(n: usize) -> Series {
        Series::new(
            "xi_1",
            (0..n)
                .map(|i| (i as f64 * 0.01, (i as f64 * 0.01).sin()))
                .collect(),
        )
    }

    #[test]
    fn self_contained_and_deterministic() {
        let a = line_plot("tracking error", "t [s]", &[sine(500)]);
        let b = line_plot("tracking error", "t [s]", &[sine(500)]);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.trim_end().ends_with("</svg>"));
        assert!(!a.contains("href"));
        let hi = (0..500)
            .map(|i| (i as f64 * 0.01).sin())
            .fold(f64::MIN, f64::max);
        let lo = (0..500)
            .map(|i| (i as f64 * 0.01).sin())
            .fold(f64::MAX, f64::min);
        assert!(a.contains(&format!("max {hi:.4e}")));
        assert!(a.contains(&format!("min {lo:.4e}")));
    }

    #[test]
    fn long_series_downsampled() {
        let svg = line_plot("t", "t", &[sine(20_001)]);
        let pts = svg
            .split("points=\"")
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap();
        let count = pts.split(' ').count();
        assert!(count <= MAX_POINTS, "{count}");
        // the final point survives
        assert!(
            pts.ends_with(&format!("{:.2},", WIDTH - RIGHT))
                || pts.contains(&format!("{:.2},", WIDTH - RIGHT))
        );
    }

    #[test]
    fn flat_and_empty_series_render() {
        let flat = line_plot(
            "w",
            "t",
            &[Series::new("w_2", vec![(0.0, 1.0), (1.0, 1.0)])],
        );
        assert!(flat.contains("max 1.0000e0"));
        let empty = line_plot("none", "t", &[Series::new("e", vec![])]);
        assert!(empty.contains("<polyline"));
    }

    #[test]
    fn labels_escaped() {
        let svg = line_plot("a<b & c", "t", &[]);
        assert!(svg.contains("a&lt;b &amp; c"));
    }
}
