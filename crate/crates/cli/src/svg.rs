//! Minimal SVG line plot of a difference curve.

use lifeyears_core::report::fmt_sig;

const W: f64 = 640.0;
const H: f64 = 360.0;
const PAD: f64 = 48.0;

/// Plots `(θ, difference)` samples with the zero line and crossing markers.
pub fn difference_plot(points: &[(f64, f64)], crossings: &[f64]) -> String {
    let (x0, x1) = (
        points.first().map_or(0.0, |p| p.0),
        points.last().map_or(1.0, |p| p.0),
    );
    let mut y0 = points.iter().map(|p| p.1).fold(0.0, f64::min);
    let mut y1 = points.iter().map(|p| p.1).fold(0.0, f64::max);
    if y1 - y0 < 1e-12 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0).max(1e-300) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let path: Vec<String> = points
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
        .collect();
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <line x1=\"{PAD}\" y1=\"{z:.2}\" x2=\"{xe}\" y2=\"{z:.2}\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n\
         <polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"2\" points=\"{pts}\"/>\n",
        z = sy(0.0),
        xe = W - PAD,
        pts = path.join(" ")
    );
    for &c in crossings {
        svg.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"#c0392b\"/>\n<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
            sx(c),
            sy(0.0),
            sx(c),
            sy(0.0) - 10.0,
            fmt_sig(c)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{PAD}\" y=\"{:.2}\" font-size=\"12\">{}</text>\n<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">{}</text>\n",
        H - PAD / 3.0,
        fmt_sig(x0),
        W - PAD,
        H - PAD / 3.0,
        fmt_sig(x1)
    ));
    svg.push_str("</svg>\n");
    svg
}
