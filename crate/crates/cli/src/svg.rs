//! Minimal SVG charts: box plots and line plots, written as plain text.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 60.0;

pub const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Roughly five evenly spaced round ticks covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).ceil() as i64;
    let end = (hi / step).floor() as i64;
    (start..=end).map(|i| i as f64 * step).collect()
}

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xlo: f64,
    xhi: f64,
    ylo: f64,
    yhi: f64,
}

impl Frame {
    fn new(x0: f64, y0: f64, w: f64, h: f64, (xlo, xhi): (f64, f64), (ylo, yhi): (f64, f64)) -> Self {
        Self {
            x0,
            y0,
            w,
            h,
            xlo,
            xhi: if xhi > xlo { xhi } else { xlo + 1.0 },
            ylo,
            yhi: if yhi > ylo { yhi } else { ylo + 1.0 },
        }
    }

    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.xlo) / (self.xhi - self.xlo) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + self.h - (y - self.ylo) / (self.yhi - self.ylo) * self.h
    }

    fn axes(&self, out: &mut String, title: &str, xlabel: &str, ylabel: &str, xticks: bool) {
        let (x0, y0, w, h) = (self.x0, self.y0, self.w, self.h);
        let _ = writeln!(
            out,
            r##"<rect x="{x0:.1}" y="{y0:.1}" width="{w:.1}" height="{h:.1}" fill="none" stroke="#333"/>"##
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14">{}</text>"#,
            x0 + w / 2.0,
            y0 - 12.0,
            escape(title)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">{}</text>"#,
            x0 + w / 2.0,
            y0 + h + 42.0,
            escape(xlabel)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
            x0 - 52.0,
            y0 + h / 2.0,
            x0 - 52.0,
            y0 + h / 2.0,
            escape(ylabel)
        );
        for t in ticks(self.ylo, self.yhi) {
            let y = self.py(t);
            let _ = writeln!(
                out,
                r##"<line x1="{:.1}" y1="{y:.1}" x2="{x0:.1}" y2="{y:.1}" stroke="#333"/><text x="{:.1}" y="{:.1}" text-anchor="end" font-size="10">{}</text>"##,
                x0 - 4.0,
                x0 - 6.0,
                y + 3.0,
                fmt_tick(t)
            );
        }
        if xticks {
            for t in ticks(self.xlo, self.xhi) {
                let x = self.px(t);
                let _ = writeln!(
                    out,
                    r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#333"/><text x="{x:.1}" y="{:.1}" text-anchor="middle" font-size="10">{}</text>"##,
                    y0 + h,
                    y0 + h + 4.0,
                    y0 + h + 16.0,
                    fmt_tick(t)
                );
            }
        }
    }
}

fn open(out: &mut String, width: f64, height: f64, comment: &str) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(out, "<!-- {} -->", comment.replace("--", "- -"));
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (pos - i as f64) * (sorted[j] - sorted[i])
}

fn finite_range<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-9);
    (lo - pad, hi + pad)
}

/// Box plots (quartiles, whiskers at 1.5 IQR, outliers as dots), one per
/// group.
pub fn boxplot(comment: &str, title: &str, ylabel: &str, groups: &[(String, Vec<f64>)]) -> String {
    let mut out = String::new();
    open(&mut out, WIDTH, HEIGHT, comment);
    let (ylo, yhi) = finite_range(groups.iter().flat_map(|(_, v)| v.iter()));
    let n = groups.len().max(1) as f64;
    let frame = Frame::new(
        MARGIN_L,
        MARGIN_T,
        WIDTH - MARGIN_L - MARGIN_R,
        HEIGHT - MARGIN_T - MARGIN_B,
        (0.0, n),
        (ylo, yhi),
    );
    frame.axes(&mut out, title, "", ylabel, false);
    for (g, (label, values)) in groups.iter().enumerate() {
        let cx = frame.px(g as f64 + 0.5);
        let color = PALETTE[g % PALETTE.len()];
        let _ = writeln!(
            out,
            r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"#,
            frame.y0 + frame.h + 16.0,
            escape(label)
        );
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            continue;
        }
        v.sort_by(f64::total_cmp);
        let (q1, q2, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
        let iqr = q3 - q1;
        let lo = *v.iter().find(|x| **x >= q1 - 1.5 * iqr).unwrap_or(&q1);
        let hi = *v.iter().rev().find(|x| **x <= q3 + 1.5 * iqr).unwrap_or(&q3);
        let half = frame.w / n * 0.3;
        let _ = writeln!(
            out,
            r##"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="#333"/>"##,
            frame.py(lo),
            frame.py(hi)
        );
        let _ = writeln!(
            out,
            r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{color}" fill-opacity="0.35" stroke="{color}"/>"##,
            cx - half,
            frame.py(q3),
            2.0 * half,
            (frame.py(q1) - frame.py(q3)).max(0.5)
        );
        let _ = writeln!(
            out,
            r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}" stroke-width="2"/>"##,
            cx - half,
            frame.py(q2),
            cx + half,
            frame.py(q2)
        );
        for x in v.iter().filter(|x| **x < lo || **x > hi) {
            let _ = writeln!(
                out,
                r#"<circle cx="{cx:.1}" cy="{:.1}" r="2" fill="{color}"/>"#,
                frame.py(*x)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// One named polyline.
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            points,
            dashed: false,
        }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

pub struct Panel {
    pub title: String,
    pub xlabel: String,
    pub ylabel: String,
    pub series: Vec<Series>,
}

/// Line plots laid out side by side, each with its own legend.
pub fn line_panels(comment: &str, panels: &[Panel]) -> String {
    let mut out = String::new();
    let width = WIDTH * panels.len().max(1) as f64;
    open(&mut out, width, HEIGHT, comment);
    for (p, panel) in panels.iter().enumerate() {
        let xr = finite_range(panel.series.iter().flat_map(|s| s.points.iter().map(|(x, _)| x)));
        let yr = finite_range(panel.series.iter().flat_map(|s| s.points.iter().map(|(_, y)| y)));
        let frame = Frame::new(
            p as f64 * WIDTH + MARGIN_L,
            MARGIN_T,
            WIDTH - MARGIN_L - MARGIN_R,
            HEIGHT - MARGIN_T - MARGIN_B,
            xr,
            yr,
        );
        frame.axes(&mut out, &panel.title, &panel.xlabel, &panel.ylabel, true);
        for (s, series) in panel.series.iter().enumerate() {
            let color = PALETTE[s % PALETTE.len()];
            let pts: Vec<String> = series
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|(x, y)| format!("{:.2},{:.2}", frame.px(*x), frame.py(*y)))
                .collect();
            let dash = if series.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"{dash}/>"#,
                pts.join(" ")
            );
            let ly = frame.y0 + 14.0 + 16.0 * s as f64;
            let lx = frame.x0 + frame.w - 150.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
                lx + 20.0,
                lx + 26.0,
                ly + 4.0,
                escape(&series.name)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round() {
        assert_eq!(ticks(0.0, 1.0), vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]);
        assert!(ticks(-120.0, -60.0).iter().all(|t| t % 10.0 == 0.0));
    }

    #[test]
    fn charts_carry_comment_and_escape() {
        let b = boxplot("manifest: abc", "a<b", "y", &[("m&n".into(), vec![1.0, 2.0, 3.0, 40.0])]);
        assert!(b.contains("<!-- manifest: abc -->"));
        assert!(b.contains("a&lt;b") && b.contains("m&amp;n"));
        assert!(b.trim_end().ends_with("</svg>"));
        let l = line_panels(
            "manifest: abc",
            &[Panel {
                title: "t".into(),
                xlabel: "x".into(),
                ylabel: "y".into(),
                series: vec![Series::new("s", vec![(0.0, 1.0), (1.0, f64::NAN), (2.0, 3.0)]).dashed()],
            }],
        );
        assert!(l.contains("stroke-dasharray") && !l.contains("NaN"));
    }
}
