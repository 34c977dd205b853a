//! Minimal log-log SVG plots: points, straight lines and axes.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;

/// A line `ln y = intercept + slope ln x`.
pub struct Line {
    pub label: String,
    pub slope: f64,
    pub intercept: f64,
    pub dashed: bool,
    pub color: &'static str,
}

pub struct LogLogPlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
    pub lines: Vec<Line>,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, lx: f64) -> f64 {
        MARGIN + (lx - self.x0) / (self.x1 - self.x0) * (WIDTH - 2.0 * MARGIN)
    }
    fn py(&self, ly: f64) -> f64 {
        HEIGHT - MARGIN - (ly - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl LogLogPlot {
    pub fn render(&self) -> String {
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
            .map(|(x, y)| (x.ln(), y.ln()))
            .collect();
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="24" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        if pts.is_empty() {
            let _ = writeln!(out, r#"<text x="{MARGIN}" y="{:.1}" font-family="sans-serif" font-size="13">no data</text>"#, HEIGHT / 2.0);
            out.push_str("</svg>\n");
            return out;
        }
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if x1 - x0 < 1e-9 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if y1 - y0 < 1e-9 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        let pad_y = 0.08 * (y1 - y0);
        let f = Frame { x0, x1, y0: y0 - pad_y, y1: y1 + pad_y };

        // axes
        let (l, r, t, b) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        let _ = writeln!(out, r##"<path d="M{l:.1},{t:.1} L{l:.1},{b:.1} L{r:.1},{b:.1}" stroke="#333" fill="none"/>"##);
        for i in 0..=4 {
            let lx = f.x0 + (f.x1 - f.x0) * f64::from(i) / 4.0;
            let ly = f.y0 + (f.y1 - f.y0) * f64::from(i) / 4.0;
            let (px, py) = (f.px(lx), f.py(ly));
            let _ = writeln!(
                out,
                r##"<text x="{px:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="middle">{:.3e}</text>"##,
                b + 16.0,
                lx.exp()
            );
            let _ = writeln!(
                out,
                r##"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" text-anchor="end">{:.2e}</text>"##,
                l - 4.0,
                py + 4.0,
                ly.exp()
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 16.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{:.1}" font-family="sans-serif" font-size="13" transform="rotate(-90 16 {:.1})" text-anchor="middle">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        );

        let _ = writeln!(out, r#"<clipPath id="plot"><rect x="{l:.1}" y="{t:.1}" width="{:.1}" height="{:.1}"/></clipPath>"#, r - l, b - t);
        for (i, line) in self.lines.iter().enumerate() {
            let (ya, yb) = (line.intercept + line.slope * f.x0, line.intercept + line.slope * f.x1);
            let dash = if line.dashed { r#" stroke-dasharray="6,4""# } else { "" };
            let _ = writeln!(
                out,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="1.5"{dash} clip-path="url(#plot)"/>"#,
                f.px(f.x0),
                f.py(ya),
                f.px(f.x1),
                f.py(yb),
                line.color
            );
            let ly = t + 16.0 + 16.0 * i as f64;
            let _ = writeln!(
                out,
                r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="1.5"{dash}/>"#,
                r - 170.0,
                r - 145.0,
                line.color
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11">{}</text>"#,
                r - 140.0,
                ly + 4.0,
                escape(&line.label)
            );
        }
        for &(x, y) in &pts {
            let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="#1f5fa8"/>"##, f.px(x), f.py(y));
        }
        out.push_str("</svg>\n");
        out
    }
}
