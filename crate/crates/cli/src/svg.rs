//! Minimal self-contained SVG line plots. Cosmetic companions to the CSV
//! files; nothing downstream reads them.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 48.0;
const PALETTE: [&str; 6] = [
    "#1b6ca8", "#c24d2c", "#2e8b57", "#8e44ad", "#b8860b", "#444444",
];

/// One polyline; non-finite points break the line.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Renders a line plot; `log_y` switches the vertical axis to log10 and
/// drops non-positive values.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, log_y: bool, series: &[Series]) -> String {
    let map_y = |y: f64| -> Option<f64> {
        if log_y {
            if y > 0.0 && y.is_finite() {
                Some(y.log10())
            } else {
                None
            }
        } else if y.is_finite() {
            Some(y)
        } else {
            None
        }
    };
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in series {
        for &(x, y) in &s.points {
            if let (true, Some(yy)) = (x.is_finite(), map_y(y)) {
                xs.push(x);
                ys.push(yy);
            }
        }
    }
    let mut out = String::new();
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    let _ = write!(
        out,
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    );
    if xs.is_empty() {
        let _ = write!(out, "<text x=\"40\" y=\"60\">no plottable data</text>\n</svg>\n");
        return out;
    }
    let (x0, x1) = padded_range(&xs);
    let (y0, y1) = padded_range(&ys);
    let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |y: f64| HEIGHT - MARGIN_B - (y - y0) / (y1 - y0) * (HEIGHT - MARGIN_T - MARGIN_B);

    let _ = write!(
        out,
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{:.1}\" height=\"{:.1}\" \
         fill=\"none\" stroke=\"#999\"/>\n",
        WIDTH - MARGIN_L - MARGIN_R,
        HEIGHT - MARGIN_T - MARGIN_B
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = write!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            px(fx),
            HEIGHT - MARGIN_B + 16.0,
            tick_label(fx, false)
        );
        let _ = write!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
            MARGIN_L - 6.0,
            py(fy) + 4.0,
            tick_label(fy, log_y)
        );
        let _ = write!(
            out,
            "<line x1=\"{MARGIN_L}\" y1=\"{0:.1}\" x2=\"{1:.1}\" y2=\"{0:.1}\" \
             stroke=\"#eee\"/>\n",
            py(fy),
            WIDTH - MARGIN_R
        );
    }
    let _ = write!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_L + (WIDTH - MARGIN_L - MARGIN_R) / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = write!(
        out,
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>\n",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(if log_y { "log10" } else { "" }.to_string() + " " + y_label)
    );
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut path = String::new();
        let mut pen_down = false;
        for &(x, y) in &s.points {
            match (x.is_finite(), map_y(y)) {
                (true, Some(yy)) => {
                    let cmd = if pen_down { 'L' } else { 'M' };
                    let _ = write!(path, "{cmd}{:.2} {:.2} ", px(x), py(yy));
                    pen_down = true;
                }
                _ => pen_down = false,
            }
        }
        if !path.is_empty() {
            let _ = write!(
                out,
                "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\"/>\n",
                path.trim_end()
            );
        }
        let ly = MARGIN_T + 14.0 + 16.0 * k as f64;
        let _ = write!(
            out,
            "<line x1=\"{0:.1}\" y1=\"{ly:.1}\" x2=\"{1:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" \
             stroke-width=\"2\"/>\n<text x=\"{2:.1}\" y=\"{3:.1}\">{4}</text>\n",
            MARGIN_L + 8.0,
            MARGIN_L + 28.0,
            MARGIN_L + 34.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn padded_range(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = (hi - lo) * 0.04;
    (lo - pad, hi + pad)
}

fn tick_label(v: f64, log: bool) -> String {
    if log {
        format!("1e{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(text: impl AsRef<str>) -> String {
    text.as_ref()
        .replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
