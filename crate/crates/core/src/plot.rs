//! Minimal deterministic SVG line plots: measured points plus an optional
//! overlay curve, with linear or log10 axes. Every coordinate is written
//! with fixed precision so reruns produce identical bytes.

use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;

#[derive(Debug, Clone, Copy, Default)]
pub struct Axes {
    pub log_x: bool,
    pub log_y: bool,
}

fn transform(value: f64, log: bool) -> f64 {
    if log {
        value.max(1e-300).log10()
    } else {
        value
    }
}

/// Renders the measured `points` (circles + polyline) with an optional
/// `overlay` polyline; needs at least two rows.
pub fn render_curve(
    points: &[(f64, f64)],
    overlay: Option<&[(f64, f64)]>,
    title: &str,
    axes: Axes,
) -> Result<String> {
    if points.len() < 2 {
        return Err(Error::EmptyTable);
    }
    let all: Vec<(f64, f64)> = points
        .iter()
        .chain(overlay.unwrap_or(&[]).iter())
        .map(|&(x, y)| (transform(x, axes.log_x), transform(y, axes.log_y)))
        .collect();
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &all {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    if x_max == x_min {
        x_max = x_min + 1.0;
    }
    if y_max == y_min {
        y_max = y_min + 1.0;
    }
    let to_px = |x: f64, y: f64| -> (f64, f64) {
        let px = MARGIN + (x - x_min) / (x_max - x_min) * (WIDTH - 2.0 * MARGIN);
        let py = HEIGHT - MARGIN - (y - y_min) / (y_max - y_min) * (HEIGHT - 2.0 * MARGIN);
        (px, py)
    };
    let polyline = |data: &[(f64, f64)]| -> String {
        data.iter()
            .map(|&(x, y)| {
                let (px, py) = to_px(transform(x, axes.log_x), transform(y, axes.log_y));
                format!("{px:.2},{py:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"24\" font-family=\"monospace\" font-size=\"14\" text-anchor=\"middle\">{title}</text>\n",
        WIDTH / 2.0
    ));
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{m:.2}\" y1=\"{b:.2}\" x2=\"{r:.2}\" y2=\"{b:.2}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    ));
    svg.push_str(&format!(
        "<line x1=\"{m:.2}\" y1=\"{t:.2}\" x2=\"{m:.2}\" y2=\"{b:.2}\" stroke=\"black\"/>\n",
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN
    ));
    // Tick labels.
    for i in 0..=4 {
        let fx = x_min + (x_max - x_min) * i as f64 / 4.0;
        let fy = y_min + (y_max - y_min) * i as f64 / 4.0;
        let (px, _) = to_px(fx, y_min);
        let (_, py) = to_px(x_min, fy);
        let x_label = if axes.log_x { format!("1e{fx:.2}") } else { format!("{fx:.3}") };
        let y_label = if axes.log_y { format!("1e{fy:.2}") } else { format!("{fy:.3}") };
        svg.push_str(&format!(
            "<text x=\"{px:.2}\" y=\"{:.2}\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"middle\">{x_label}</text>\n",
            HEIGHT - MARGIN + 16.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{py:.2}\" font-family=\"monospace\" font-size=\"10\" text-anchor=\"end\">{y_label}</text>\n",
            MARGIN - 6.0
        ));
    }
    if let Some(curve) = overlay {
        if curve.len() >= 2 {
            svg.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"#c44\" stroke-width=\"1.5\" stroke-dasharray=\"6 3\"/>\n",
                polyline(curve)
            ));
        }
    }
    svg.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#246\" stroke-width=\"1.5\"/>\n",
        polyline(points)
    ));
    for &(x, y) in points {
        let (px, py) = to_px(transform(x, axes.log_x), transform(y, axes.log_y));
        svg.push_str(&format!(
            "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"3\" fill=\"#246\"/>\n"
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_single_row() {
        let err = render_curve(&[(0.1, 0.2)], None, "t", Axes::default());
        assert!(matches!(err, Err(Error::EmptyTable)));
    }

    #[test]
    fn emits_valid_markup_with_one_circle_per_point() {
        let pts = [(0.04, 0.1), (0.02, 0.06), (0.01, 0.03)];
        let overlay = [(0.04, 0.11), (0.01, 0.025)];
        let svg = render_curve(&pts, Some(&overlay), "stability", Axes::default()).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), pts.len());
        assert_eq!(svg.matches("<polyline").count(), 2);
    }

    #[test]
    fn output_is_deterministic() {
        let pts = [(1.0, 0.5), (2.0, 0.25), (3.0, 0.125)];
        let a = render_curve(&pts, None, "rates", Axes { log_x: false, log_y: true }).unwrap();
        let b = render_curve(&pts, None, "rates", Axes { log_x: false, log_y: true }).unwrap();
        assert_eq!(a, b);
    }
}
