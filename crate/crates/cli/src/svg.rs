//! Minimal SVG line plots and heat maps with fixed-precision coordinates.

use std::fmt::Write as _;

use crate::format::g9;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit<'p>(points: impl Iterator<Item = &'p (f64, f64)>) -> Frame {
        let mut x = (f64::INFINITY, f64::NEG_INFINITY);
        let mut y = (f64::INFINITY, f64::NEG_INFINITY);
        for &(a, b) in points {
            if a.is_finite() && b.is_finite() {
                x = (x.0.min(a), x.1.max(a));
                y = (y.0.min(b), y.1.max(b));
            }
        }
        Frame {
            x: widen(x),
            y: widen(y),
        }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn widen((lo, hi): (f64, f64)) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 * (1.0 + lo.abs()) {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn open(out: &mut String, comment: &str, title: &str) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(out, "<!-- {comment} -->");
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{}</text>",
        WIDTH / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        out,
        "<path d=\"M{x0:.1},{y0:.1} L{x0:.1},{y1:.1} L{x1:.1},{y1:.1}\" fill=\"none\" stroke=\"black\"/>"
    );
    for k in 0..=4 {
        let s = k as f64 / 4.0;
        let xv = f.x.0 + s * (f.x.1 - f.x.0);
        let yv = f.y.0 + s * (f.y.1 - f.y.0);
        let (px, py) = (f.px(xv), f.py(yv));
        let _ = writeln!(
            out,
            "<text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            y1 + 16.0,
            short(xv)
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            x0 - 6.0,
            py + 4.0,
            short(yv)
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 {:.1})\">{}</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

fn short(v: f64) -> String {
    let s = g9((v * 1e4).round() / 1e4);
    if s.len() > 9 {
        format!("{v:.2e}")
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn line_plot(
    comment: &str,
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[Series<'_>],
) -> String {
    let frame = Frame::fit(series.iter().flat_map(|s| s.points.iter()));
    let mut out = String::new();
    open(&mut out, comment, title);
    axes(&mut out, &frame, xlabel, ylabel);
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut d = String::new();
        let mut pen_down = false;
        for &(x, y) in &s.points {
            if !(x.is_finite() && y.is_finite()) {
                pen_down = false;
                continue;
            }
            let _ = write!(
                d,
                "{}{:.2},{:.2} ",
                if pen_down { 'L' } else { 'M' },
                frame.px(x),
                frame.py(y)
            );
            pen_down = true;
        }
        let opacity = if series.len() > PALETTE.len() {
            0.5
        } else {
            1.0
        };
        let _ = writeln!(
            out,
            "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.2\" stroke-opacity=\"{opacity}\"/>",
            d.trim_end()
        );
    }
    if series.len() <= PALETTE.len() {
        for (k, s) in series.iter().enumerate() {
            let y = TOP + 14.0 + 16.0 * k as f64;
            let _ = writeln!(
                out,
                "<text x=\"{:.1}\" y=\"{y:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{}\">{}</text>",
                WIDTH - RIGHT - 6.0,
                PALETTE[k % PALETTE.len()],
                escape(s.label)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Heat map of `values[row][col]` with rows along the vertical axis.
pub fn heat_map(
    comment: &str,
    title: &str,
    xlabel: &str,
    ylabel: &str,
    x_range: (f64, f64),
    y_range: (f64, f64),
    values: &[Vec<f64>],
) -> String {
    let frame = Frame {
        x: widen(x_range),
        y: widen(y_range),
    };
    let mut out = String::new();
    open(&mut out, comment, title);
    let rows = values.len().max(1);
    let cols = values.first().map_or(1, |r| r.len().max(1));
    let (lo, hi) = values
        .iter()
        .flatten()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let (lo, hi) = widen((lo, hi));
    let cell_w = (WIDTH - LEFT - RIGHT) / cols as f64;
    let cell_h = (HEIGHT - TOP - BOTTOM) / rows as f64;
    for (r, row) in values.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            let s = if v.is_finite() {
                ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let x = LEFT + c as f64 * cell_w;
            let y = HEIGHT - BOTTOM - (r + 1) as f64 * cell_h;
            let _ = writeln!(
                out,
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                cell_w + 0.05,
                cell_h + 0.05,
                ramp(s)
            );
        }
    }
    axes(&mut out, &frame, xlabel, ylabel);
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">range [{}, {}]</text>",
        WIDTH - RIGHT,
        TOP - 4.0,
        short(lo),
        short(hi)
    );
    out.push_str("</svg>\n");
    out
}

/// Dark blue through white to dark red.
fn ramp(s: f64) -> String {
    let (r, g, b) = if s < 0.5 {
        let t = s / 0.5;
        (30.0 + 225.0 * t, 60.0 + 195.0 * t, 160.0 + 95.0 * t)
    } else {
        let t = (s - 0.5) / 0.5;
        (255.0 - 75.0 * t, 255.0 - 225.0 * t, 255.0 - 225.0 * t)
    };
    format!(
        "#{:02x}{:02x}{:02x}",
        r.round() as u8,
        g.round() as u8,
        b.round() as u8
    )
}
