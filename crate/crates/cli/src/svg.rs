//! Minimal line-plot SVG writer with a fixed 800x600 canvas.

use std::fmt::Write as _;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 70.0;

const COLORS: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    LogLog,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

pub struct Plot<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub scale: Scale,
    pub series: &'a [Series],
    /// Draw a line of this log-log slope through the first point of the
    /// first series.
    pub reference_slope: Option<f64>,
}

/// Maps data coordinates to pixels.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    scale: Scale,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit(scale: Scale, series: &[Series]) -> Self {
        let t = |v: f64| if scale == Scale::LogLog { v.log10() } else { v };
        let pts = series
            .iter()
            .flat_map(|s| s.points.iter())
            .filter(|(x, y)| scale == Scale::Linear || (*x > 0.0 && *y > 0.0))
            .map(|&(x, y)| (t(x), t(y)));
        let mut x = (f64::INFINITY, f64::NEG_INFINITY);
        let mut y = (f64::INFINITY, f64::NEG_INFINITY);
        for (px, py) in pts {
            x = (x.0.min(px), x.1.max(px));
            y = (y.0.min(py), y.1.max(py));
        }
        if !x.0.is_finite() {
            x = (0.0, 1.0);
            y = (0.0, 1.0);
        }
        if scale == Scale::Linear {
            y = (y.0.min(0.0), y.1.max(1.0));
        }
        let widen = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        Self { scale, x: widen(x), y: widen(y) }
    }

    fn transform(&self, v: f64) -> f64 {
        if self.scale == Scale::LogLog {
            v.log10()
        } else {
            v
        }
    }

    pub fn px(&self, x: f64) -> f64 {
        LEFT + (self.transform(x) - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    pub fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (self.transform(y) - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }

    /// Inverse of [`Frame::px`] in transformed coordinates.
    #[cfg(test)]
    pub fn unpx(&self, px: f64) -> f64 {
        self.x.0 + (px - LEFT) / (WIDTH - LEFT - RIGHT) * (self.x.1 - self.x.0)
    }

    /// Inverse of [`Frame::py`] in transformed coordinates.
    #[cfg(test)]
    pub fn unpy(&self, py: f64) -> f64 {
        self.y.0 + (HEIGHT - BOTTOM - py) / (HEIGHT - TOP - BOTTOM) * (self.y.1 - self.y.0)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render(plot: &Plot) -> String {
    render_with_frame(plot).0
}

pub fn render_with_frame(plot: &Plot) -> (String, Frame) {
    let frame = Frame::fit(plot.scale, plot.series);
    let mut out = String::new();
    let w = |out: &mut String, s: String| out.push_str(&s);
    w(
        &mut out,
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" width=\"{WIDTH}\" height=\"{HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
        ),
    );
    w(&mut out, format!("<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"));
    w(
        &mut out,
        format!(
            "<text x=\"{}\" y=\"28\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
            (LEFT + WIDTH - RIGHT) / 2.0,
            escape(plot.title)
        ),
    );
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    w(
        &mut out,
        format!("<rect x=\"{x0}\" y=\"{y0}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", x1 - x0, y1 - y0),
    );

    // ticks: decades on log axes, five intervals on linear ones
    let ticks = |lo: f64, hi: f64| -> Vec<f64> {
        match plot.scale {
            Scale::LogLog => (lo.floor() as i32..=hi.ceil() as i32)
                .map(|e| e as f64)
                .filter(|&e| e >= lo - 1e-9 && e <= hi + 1e-9)
                .collect(),
            Scale::Linear => (0..=5).map(|i| lo + (hi - lo) * i as f64 / 5.0).collect(),
        }
    };
    let label = |v: f64| match plot.scale {
        Scale::LogLog => format!("1e{}", v as i32),
        Scale::Linear => format!("{}", (v * 1000.0).round() / 1000.0),
    };
    for t in ticks(frame.x.0, frame.x.1) {
        let px = LEFT + (t - frame.x.0) / (frame.x.1 - frame.x.0) * (x1 - x0);
        w(&mut out, format!("<line x1=\"{px:.2}\" y1=\"{y1}\" x2=\"{px:.2}\" y2=\"{}\" stroke=\"black\"/>\n", y1 + 5.0));
        w(&mut out, format!("<text x=\"{px:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", y1 + 20.0, label(t)));
    }
    for t in ticks(frame.y.0, frame.y.1) {
        let py = y1 - (t - frame.y.0) / (frame.y.1 - frame.y.0) * (y1 - y0);
        w(&mut out, format!("<line x1=\"{}\" y1=\"{py:.2}\" x2=\"{x0}\" y2=\"{py:.2}\" stroke=\"black\"/>\n", x0 - 5.0));
        w(&mut out, format!("<text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n", x0 - 8.0, py + 4.0, label(t)));
    }
    w(
        &mut out,
        format!("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", (x0 + x1) / 2.0, HEIGHT - 25.0, escape(plot.x_label)),
    );
    w(
        &mut out,
        format!(
            "<text x=\"20\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 20 {0})\">{1}</text>\n",
            (y0 + y1) / 2.0,
            escape(plot.y_label)
        ),
    );

    for (i, s) in plot.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| plot.scale == Scale::Linear || (*x > 0.0 && *y > 0.0))
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        w(
            &mut out,
            format!("<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n", pts.join(" ")),
        );
        let ly = TOP + 20.0 * i as f64 + 10.0;
        w(&mut out, format!("<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n", x1 + 10.0, x1 + 30.0));
        w(&mut out, format!("<text x=\"{}\" y=\"{}\">{}</text>\n", x1 + 35.0, ly + 4.0, escape(&s.label)));
    }

    if let (Some(slope), Scale::LogLog) = (plot.reference_slope, plot.scale) {
        let anchor = plot.series.first().and_then(|s| s.points.iter().find(|(x, y)| *x > 0.0 && *y > 0.0));
        if let Some(&(xa, ya)) = anchor {
            let xb = 10f64.powf(frame.x.1);
            let yb = ya * (xb / xa).powf(slope);
            let _ = writeln!(
                out,
                "<line class=\"reference\" x1=\"{:.6}\" y1=\"{:.6}\" x2=\"{:.6}\" y2=\"{:.6}\" stroke=\"black\" stroke-width=\"1.5\"/>",
                frame.px(xa),
                frame.py(ya),
                frame.px(xb),
                frame.py(yb)
            );
        }
    }
    out.push_str("</svg>\n");
    (out, frame)
}
