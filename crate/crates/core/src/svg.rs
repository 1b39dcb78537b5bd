//! Minimal SVG line plots: a profile line over a shaded band, highlighted
//! anomaly spans and vertical event markers. Output is deterministic so
//! plots can be compared structurally in tests.

use std::fmt::Write;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 320.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 28.0;
const BOTTOM: f64 = 40.0;

#[derive(Debug, Clone, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// x positions shared by `line`, `band_lower` and `band_upper`.
    pub x: Vec<f64>,
    pub line: Vec<Option<f64>>,
    pub band_lower: Vec<Option<f64>>,
    pub band_upper: Vec<Option<f64>>,
    /// Highlighted x spans.
    pub spans: Vec<(f64, f64)>,
    /// Labeled vertical markers.
    pub markers: Vec<(f64, String)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

/// Consecutive runs of defined points.
fn segments(x: &[f64], y: &[Option<f64>]) -> Vec<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    for (&xi, yi) in x.iter().zip(y) {
        match yi {
            Some(v) if v.is_finite() => cur.push((xi, *v)),
            _ => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn extent(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.filter(|v| v.is_finite()).fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

pub fn render(plot: &Plot) -> String {
    let (x0, x1) = extent(plot.x.iter().copied().chain(plot.markers.iter().map(|m| m.0))).unwrap_or((0.0, 1.0));
    let ys = plot.line.iter().chain(&plot.band_lower).chain(&plot.band_upper).flatten().copied();
    let (y0, y1) = extent(ys).unwrap_or((0.0, 1.0));
    let pad = ((y1 - y0) * 0.05).max(1e-9);
    let f = Frame {
        x0,
        x1: if x1 > x0 { x1 } else { x0 + 1.0 },
        y0: y0 - pad,
        y1: y1 + pad,
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"##
    );
    let _ = writeln!(s, r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"##);
    let _ = writeln!(s, r##"<text x="{}" y="18" font-size="14" text-anchor="middle">{}</text>"##, WIDTH / 2.0, escape(&plot.title));

    for &(a, b) in &plot.spans {
        let (pa, pb) = (f.px(a), f.px(b));
        let _ = writeln!(
            s,
            r##"<rect class="anomaly" x="{pa:.2}" y="{TOP}" width="{:.2}" height="{:.2}" fill="#f4b6b6" fill-opacity="0.6"/>"##,
            (pb - pa).max(0.5),
            HEIGHT - TOP - BOTTOM
        );
    }

    // band: polygon per run where both limits are defined
    let both: Vec<Option<(f64, f64)>> =
        plot.band_lower.iter().zip(&plot.band_upper).map(|(l, u)| l.zip(*u)).collect();
    let mut i = 0;
    while i < both.len() {
        if both[i].is_none() {
            i += 1;
            continue;
        }
        let j = (i..both.len()).find(|&k| both[k].is_none()).unwrap_or(both.len());
        let mut pts: Vec<String> = (i..j).map(|k| format!("{:.2},{:.2}", f.px(plot.x[k]), f.py(both[k].unwrap().1))).collect();
        pts.extend((i..j).rev().map(|k| format!("{:.2},{:.2}", f.px(plot.x[k]), f.py(both[k].unwrap().0))));
        let _ = writeln!(s, r##"<polygon class="band" points="{}" fill="#9ecae1" fill-opacity="0.5" stroke="none"/>"##, pts.join(" "));
        i = j;
    }

    for seg in segments(&plot.x, &plot.line) {
        let pts: Vec<String> = seg.iter().map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y))).collect();
        let _ = writeln!(s, r##"<polyline class="profile" points="{}" fill="none" stroke="black" stroke-width="1"/>"##, pts.join(" "));
    }

    for (x, label) in &plot.markers {
        let px = f.px(*x);
        let _ = writeln!(
            s,
            r##"<line class="event" x1="{px:.2}" y1="{TOP}" x2="{px:.2}" y2="{:.2}" stroke="#d62728" stroke-dasharray="3,3"/>"##,
            HEIGHT - BOTTOM
        );
        let _ = writeln!(s, r##"<text x="{px:.2}" y="{}" font-size="9" text-anchor="middle" fill="#d62728">{}</text>"##, TOP - 2.0, escape(label));
    }

    // axes and tick labels at the extremes
    let (bx, by) = (LEFT, HEIGHT - BOTTOM);
    let _ = writeln!(s, r##"<line x1="{bx}" y1="{by}" x2="{}" y2="{by}" stroke="black"/>"##, WIDTH - RIGHT);
    let _ = writeln!(s, r##"<line x1="{bx}" y1="{TOP}" x2="{bx}" y2="{by}" stroke="black"/>"##);
    for x in [f.x0, (f.x0 + f.x1) / 2.0, f.x1] {
        let _ = writeln!(s, r##"<text x="{:.2}" y="{}" font-size="10" text-anchor="middle">{:.1}</text>"##, f.px(x), by + 14.0, x);
    }
    for y in [f.y0, (f.y0 + f.y1) / 2.0, f.y1] {
        let _ = writeln!(s, r##"<text x="{}" y="{:.2}" font-size="10" text-anchor="end">{:.3}</text>"##, bx - 4.0, f.py(y) + 3.0, y);
    }
    let _ = writeln!(s, r##"<text x="{}" y="{}" font-size="11" text-anchor="middle">{}</text>"##, (LEFT + WIDTH - RIGHT) / 2.0, HEIGHT - 6.0, escape(&plot.x_label));
    let _ = writeln!(
        s,
        r##"<text x="14" y="{0}" font-size="11" text-anchor="middle" transform="rotate(-90 14 {0})">{1}</text>"##,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        escape(&plot.y_label)
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structure() {
        let plot = Plot {
            title: "VP <q=100>".into(),
            x: vec![0.0, 1.0, 2.0, 3.0, 4.0],
            line: vec![Some(1.0), Some(2.0), None, Some(3.0), Some(1.0)],
            band_lower: vec![Some(0.0); 5],
            band_upper: vec![Some(2.5); 5],
            spans: vec![(3.0, 3.5)],
            markers: vec![(2.0, "E1".into())],
            ..Default::default()
        };
        let svg = render(&plot);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches(r##"class="profile""##).count(), 2);
        assert_eq!(svg.matches(r##"class="band""##).count(), 1);
        assert_eq!(svg.matches(r##"class="anomaly""##).count(), 1);
        assert_eq!(svg.matches(r##"class="event""##).count(), 1);
        assert!(svg.contains("VP &lt;q=100&gt;"));
        assert_eq!(svg, render(&plot));
    }

    #[test]
    fn empty_plot_renders() {
        let svg = render(&Plot::default());
        assert!(svg.contains("</svg>"));
        assert!(!svg.contains("NaN"));
    }
}
