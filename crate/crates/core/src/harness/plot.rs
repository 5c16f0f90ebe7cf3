use std::fmt::Write;

use super::SlopeFit;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 56.0;

/// Static log-log scatter of the fit points with the fitted line.
pub fn render_svg(fit: &SlopeFit, axis: &str) -> String {
    let finite: Vec<(f64, f64)> = fit.points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    let span = |sel: fn(&(f64, f64)) -> f64| {
        let lo = finite.iter().map(sel).fold(f64::INFINITY, f64::min);
        let hi = finite.iter().map(sel).fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            let pad = 0.08 * (hi - lo);
            (lo - pad, hi + pad)
        }
    };
    let (x0, x1) = span(|p| p.0);
    let (y0, y1) = span(|p| p.1);
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<path d="M{m} {t} V{b} H{r}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">log {axis}</text>"#, WIDTH / 2.0, HEIGHT - 16.0);
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">log RMSE</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    if fit.slope.is_finite() {
        let line = |x: f64| fit.intercept + fit.slope * x;
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="steelblue" stroke-width="1.5"/>"#,
            px(x0),
            py(line(x0)),
            px(x1),
            py(line(x1))
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}">slope {:.3} (se {:.3})</text>"#,
            MARGIN + 8.0,
            MARGIN - 12.0,
            fit.slope,
            fit.stderr
        );
    }
    for &(x, y) in &finite {
        let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="firebrick"/>"#, px(x), py(y));
    }
    svg.push_str("</svg>\n");
    svg
}
