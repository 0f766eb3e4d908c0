//! Learning-curve rendering as plain SVG 1.1, written directly so identical
//! metrics produce byte-identical documents.

use std::collections::BTreeMap;

use normkit_core::train::MetricsRecord;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 160.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// One polyline of loss-by-step per split, with labeled axes and the
/// conventions block embedded in a `<desc>` element.
pub fn render_curves(records: &[MetricsRecord], conventions_line: &str) -> String {
    let mut by_split: BTreeMap<&str, Vec<(u64, f64)>> = BTreeMap::new();
    for r in records {
        by_split.entry(r.split.name()).or_default().push((r.step, r.loss));
    }

    let steps: Vec<u64> = records.iter().map(|r| r.step).collect();
    let losses: Vec<f64> = records.iter().map(|r| r.loss).collect();
    let x_min = steps.iter().copied().min().unwrap_or(0) as f64;
    let x_max = steps.iter().copied().max().unwrap_or(1) as f64;
    let y_min = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let y_max = losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (y_min, y_max) = if records.is_empty() {
        (0.0, 1.0)
    } else if (y_max - y_min).abs() < 1e-12 {
        (y_min - 0.5, y_max + 0.5)
    } else {
        let pad = (y_max - y_min) * 0.05;
        (y_min - pad, y_max + pad)
    };
    let x_span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |step: u64| MARGIN_LEFT + (step as f64 - x_min) / x_span * plot_w;
    let sy = |loss: f64| MARGIN_TOP + (y_max - loss) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str(&format!("  <desc>conventions: {conventions_line}</desc>\n"));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">loss by step</text>\n",
        MARGIN_LEFT + plot_w / 2.0
    ));

    // frame and ticks
    svg.push_str(&format!(
        "  <rect x=\"{MARGIN_LEFT:.2}\" y=\"{MARGIN_TOP:.2}\" width=\"{plot_w:.2}\" height=\"{plot_h:.2}\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n"
    ));
    for i in 0..=4u32 {
        let frac = i as f64 / 4.0;
        let x_val = x_min + frac * x_span;
        let x = MARGIN_LEFT + frac * plot_w;
        svg.push_str(&format!(
            "  <line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\" stroke-width=\"1\"/>\n",
            MARGIN_TOP + plot_h,
            MARGIN_TOP + plot_h + 5.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{x:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{:.0}</text>\n",
            MARGIN_TOP + plot_h + 20.0,
            x_val
        ));
        let y_val = y_min + frac * (y_max - y_min);
        let y = MARGIN_TOP + plot_h - frac * plot_h;
        svg.push_str(&format!(
            "  <line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{MARGIN_LEFT:.2}\" y2=\"{y:.2}\" stroke=\"black\" stroke-width=\"1\"/>\n",
            MARGIN_LEFT - 5.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{:.4}</text>\n",
            MARGIN_LEFT - 9.0,
            y + 4.0,
            y_val
        ));
    }
    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">step</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    ));
    svg.push_str(&format!(
        "  <text x=\"18\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2})\">loss</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    ));

    // one polyline per split, splits in sorted order
    for (i, (split, points)) in by_split.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = points
            .iter()
            .map(|&(step, loss)| format!("{:.2},{:.2}", sx(step), sy(loss)))
            .collect();
        svg.push_str(&format!(
            "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            coords.join(" ")
        ));
        let ly = MARGIN_TOP + 14.0 + i as f64 * 18.0;
        let lx = WIDTH - MARGIN_RIGHT + 12.0;
        svg.push_str(&format!(
            "  <line x1=\"{lx:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            ly - 4.0,
            lx + 18.0,
            ly - 4.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{ly:.2}\" font-family=\"sans-serif\" font-size=\"12\">{split}</text>\n",
            lx + 24.0
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
