//! A dependency-free log-log band chart.

use std::fmt::Write;

use scalepred::analysis::PredictionBand;
use scalepred::data::{DataSet, Role};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;

struct LogAxis {
    lo: f64,
    hi: f64,
    start: f64,
    end: f64,
}

impl LogAxis {
    fn new(values: impl Iterator<Item = f64>, start: f64, end: f64) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for v in values.filter(|v| *v > 0.0 && v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (1.0, 10.0);
        }
        // Pad by a tenth of a decade so markers are not clipped.
        let (lo, hi) = (lo.log10() - 0.1, hi.log10() + 0.1);
        Self { lo, hi: if hi > lo { hi } else { lo + 1.0 }, start, end }
    }

    fn map(&self, v: f64) -> f64 {
        let t = (v.max(1e-300).log10() - self.lo) / (self.hi - self.lo);
        self.start + t * (self.end - self.start)
    }

    fn decades(&self) -> impl Iterator<Item = i32> {
        (self.lo.ceil() as i32)..=(self.hi.floor() as i32)
    }
}

fn polyline(points: &[(f64, f64)]) -> String {
    let mut out = String::new();
    for (i, (x, y)) in points.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{x:.2},{y:.2}");
    }
    out
}

/// Renders the band (dashed bounds, solid median) with teacher points as
/// squares and test points as triangles.
pub fn band_chart(band: &PredictionBand, data: &DataSet, title: &str) -> String {
    let x = LogAxis::new(band.grid.iter().copied().chain(data.observations().iter().map(|o| o.nodes as f64)), LEFT, WIDTH - RIGHT);
    let y = LogAxis::new(
        band.hdr_low
            .iter()
            .chain(&band.hdr_high)
            .chain(&band.median)
            .copied()
            .chain(data.observations().iter().map(|o| o.time)),
        HEIGHT - BOTTOM,
        TOP,
    );

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    let _ = writeln!(svg, r#"<g class="axes" stroke="black" fill="none">"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}"/>"#,
        WIDTH - LEFT - RIGHT,
        HEIGHT - TOP - BOTTOM
    );
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, r#"<g class="ticks" fill="black">"#);
    for d in x.decades() {
        let px = x.map(10f64.powi(d));
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.2}" y1="{0}" x2="{px:.2}" y2="{1}" stroke="black"/><text x="{px:.2}" y="{2}" text-anchor="middle">1e{d}</text>"#,
            HEIGHT - BOTTOM,
            HEIGHT - BOTTOM + 6.0,
            HEIGHT - BOTTOM + 20.0
        );
    }
    for d in y.decades() {
        let py = y.map(10f64.powi(d));
        let _ = writeln!(
            svg,
            r#"<line x1="{0}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{1}" y="{2:.2}" text-anchor="end">1e{d}</text>"#,
            LEFT - 6.0,
            LEFT - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{0}" y="{1}" text-anchor="middle">P (nodes)</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(16 {0}) rotate(-90)" text-anchor="middle">T (s)</text>"#,
        (TOP + HEIGHT - BOTTOM) / 2.0
    );
    let _ = writeln!(svg, "</g>");

    let curve = |values: &[f64]| -> Vec<(f64, f64)> {
        band.grid.iter().zip(values).map(|(p, v)| (x.map(*p), y.map(*v))).collect()
    };
    let low = curve(&band.hdr_low);
    let high = curve(&band.hdr_high);
    let mut area = high.clone();
    area.extend(low.iter().rev());
    let _ = writeln!(svg, r##"<polygon class="band" points="{}" fill="#c6dbef" stroke="none"/>"##, polyline(&area));
    for (class, line) in [("hdr-low", &low), ("hdr-high", &high)] {
        let _ = writeln!(
            svg,
            r##"<polyline class="{class}" points="{}" fill="none" stroke="#08519c" stroke-dasharray="6 4"/>"##,
            polyline(line)
        );
    }
    let _ = writeln!(
        svg,
        r##"<polyline class="median" points="{}" fill="none" stroke="#08519c" stroke-width="2"/>"##,
        polyline(&curve(&band.median))
    );

    let _ = writeln!(svg, r#"<g class="data" stroke="black">"#);
    for o in data.observations() {
        let (px, py) = (x.map(o.nodes as f64), y.map(o.time));
        match o.role {
            Role::Teacher => {
                let _ = writeln!(
                    svg,
                    r#"<rect class="teacher" x="{:.2}" y="{:.2}" width="8" height="8" fill="black"/>"#,
                    px - 4.0,
                    py - 4.0
                );
            }
            Role::Test => {
                let _ = writeln!(
                    svg,
                    r#"<polygon class="test" points="{}" fill="white"/>"#,
                    polyline(&[(px, py - 5.0), (px - 5.0, py + 4.0), (px + 5.0, py + 4.0)])
                );
            }
        }
    }
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    svg
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use scalepred::data::Observation;

    #[test]
    fn log_axis_maps_decades_evenly() {
        let axis = LogAxis::new([1.0, 1000.0].into_iter(), 0.0, 100.0);
        let a = axis.map(10.0) - axis.map(1.0);
        let b = axis.map(1000.0) - axis.map(100.0);
        assert!((a - b).abs() < 1e-9);
        assert_eq!(axis.decades().collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn chart_marks_roles() {
        let band = PredictionBand {
            grid: vec![4.0, 64.0, 1024.0],
            median: vec![1000.0, 70.0, 9.0],
            hdr_low: vec![900.0, 60.0, 5.0],
            hdr_high: vec![1100.0, 80.0, 15.0],
        };
        let data = DataSet::new(
            "d",
            vec![Observation::new(4, 1000.0, Role::Teacher), Observation::new(1024, 8.0, Role::Test)],
        )
        .unwrap();
        let svg = band_chart(&band, &data, "a < b");
        assert_eq!(svg.matches(r#"class="teacher""#).count(), 1);
        assert_eq!(svg.matches(r#"class="test""#).count(), 1);
        assert_eq!(svg.matches("stroke-dasharray").count(), 2);
        assert!(svg.contains("a &lt; b"));
    }
}
