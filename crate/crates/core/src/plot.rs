//! Minimal SVG rendering of manifest figures.

use std::fmt::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{self, Figure, Matrix, PlotKind};

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 90.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

const SERIES: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

// viridis, sampled at five stops
const RAMP: [(f64, f64, f64); 5] = [
    (68.0, 1.0, 84.0),
    (59.0, 82.0, 139.0),
    (33.0, 145.0, 140.0),
    (94.0, 201.0, 98.0),
    (253.0, 231.0, 37.0),
];

pub fn render(fig: &Figure, dir: &Path) -> Result<String> {
    let path = dir.join(&fig.data_file);
    let table = io::read_table(&path)?;
    match fig.kind {
        PlotKind::Line => Ok(line_svg(fig, &table)),
        PlotKind::Heatmap => {
            let m = Matrix::from_table(&table).map_err(|e| Error::parse(&path, e))?;
            Ok(heatmap_svg(fig, &m))
        }
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi <= lo {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }
}

fn header(out: &mut String) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn frame(out: &mut String, ax: &Axes, fig: &Figure) {
    let (x0, x1) = (LEFT, W - RIGHT);
    let (y0, y1) = (TOP, H - BOTTOM);
    let _ = writeln!(
        out,
        r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y1 - y0
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let xv = ax.x.0 + t * (ax.x.1 - ax.x.0);
        let yv = ax.y.0 + t * (ax.y.1 - ax.y.0);
        let (px, py) = (ax.px(xv), ax.py(yv));
        let _ = writeln!(
            out,
            r#"<line x1="{px:.1}" y1="{y1}" x2="{px:.1}" y2="{}" stroke="black"/><text x="{px:.1}" y="{}" text-anchor="middle">{}</text>"#,
            y1 + 4.0,
            y1 + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{py:.1}" x2="{x0}" y2="{py:.1}" stroke="black"/><text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
            x0 - 4.0,
            x0 - 6.0,
            py + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
        0.5 * (x0 + x1),
        H - 12.0,
        escape(&fig.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        0.5 * (y0 + y1),
        0.5 * (y0 + y1),
        escape(&fig.y_label)
    );
    let _ = writeln!(out, r#"<text x="{x0}" y="18">{}</text>"#, escape(&fig.id));
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn line_svg(fig: &Figure, t: &io::Table) -> String {
    let ax = Axes {
        x: range(t.rows.iter().map(|r| r[0])),
        y: range(t.rows.iter().flat_map(|r| r[1..].iter().cloned())),
    };
    let mut out = String::new();
    header(&mut out);
    frame(&mut out, &ax, fig);
    for k in 1..t.header.len() {
        let colour = SERIES[(k - 1) % SERIES.len()];
        let pts: Vec<String> = t
            .rows
            .iter()
            .filter(|r| r[0].is_finite() && r[k].is_finite())
            .map(|r| format!("{:.2},{:.2}", ax.px(r[0]), ax.py(r[k])))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = TOP + 14.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{ly}" fill="{colour}">{}</text>"#,
            W - RIGHT + 6.0,
            escape(&t.header[k])
        );
    }
    out.push_str("</svg>\n");
    out
}

fn colour(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let i = (t.floor() as usize).min(RAMP.len() - 2);
    let u = t - i as f64;
    let (a, b) = (RAMP[i], RAMP[i + 1]);
    let mix = |p: f64, q: f64| (p + u * (q - p)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

/// Cell edges halfway between coordinates, extrapolated at the ends.
fn edges(c: &[f64]) -> Vec<f64> {
    if c.len() == 1 {
        return vec![c[0] - 0.5, c[0] + 0.5];
    }
    let mut e = Vec::with_capacity(c.len() + 1);
    e.push(c[0] - 0.5 * (c[1] - c[0]));
    for w in c.windows(2) {
        e.push(0.5 * (w[0] + w[1]));
    }
    let n = c.len();
    e.push(c[n - 1] + 0.5 * (c[n - 1] - c[n - 2]));
    e
}

fn heatmap_svg(fig: &Figure, m: &Matrix) -> String {
    // columns on x, rows on y
    let ex = edges(&m.col_coords);
    let ey = edges(&m.row_coords);
    let ax = Axes {
        x: range(ex.iter().cloned()),
        y: range(ey.iter().cloned()),
    };
    let (lo, hi) = range(m.values.iter().cloned());
    let mut out = String::new();
    header(&mut out);
    for i in 0..m.row_coords.len() {
        for j in 0..m.col_coords.len() {
            let v = m.values[(i, j)];
            let fill = if v.is_finite() {
                colour((v - lo) / (hi - lo))
            } else {
                "#bbbbbb".to_string()
            };
            let (xa, xb) = (ax.px(ex[j]), ax.px(ex[j + 1]));
            let (ya, yb) = (ax.py(ey[i]), ax.py(ey[i + 1]));
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                xa.min(xb),
                ya.min(yb),
                (xb - xa).abs() + 0.3,
                (yb - ya).abs() + 0.3
            );
        }
    }
    frame(&mut out, &ax, fig);
    let bar_x = W - RIGHT + 20.0;
    let steps = 32;
    let h = (H - TOP - BOTTOM) / steps as f64;
    for k in 0..steps {
        let t = (k as f64 + 0.5) / steps as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{bar_x}" y="{:.2}" width="14" height="{:.2}" fill="{}"/>"#,
            H - BOTTOM - (k + 1) as f64 * h,
            h + 0.3,
            colour(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}">{}</text><text x="{}" y="{}">{}</text>"#,
        bar_x,
        TOP - 4.0,
        tick(hi),
        bar_x,
        H - BOTTOM + 14.0,
        tick(lo)
    );
    if let Some(z) = &fig.z_label {
        let _ = writeln!(out, r#"<text x="{bar_x}" y="{}">{}</text>"#, H - 12.0, escape(z));
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn colour_ramp_endpoints() {
        assert_eq!(colour(0.0), "#440154");
        assert_eq!(colour(1.0), "#fde725");
        assert_eq!(colour(f64::NAN.max(2.0)), "#fde725");
    }

    #[test]
    fn heatmap_has_one_rect_per_cell() {
        let m = Matrix {
            corner: "a/b".into(),
            row_coords: vec![0.0, 1.0],
            col_coords: vec![0.0, 1.0, 2.0],
            values: array![[0.0, 1.0, f64::NAN], [2.0, 3.0, 4.0]],
        };
        let fig = Figure {
            id: "t".into(),
            data_file: "x.csv".into(),
            kind: PlotKind::Heatmap,
            x_label: "b".into(),
            y_label: "a".into(),
            z_label: None,
        };
        let svg = heatmap_svg(&fig, &m);
        assert!(svg.contains("#bbbbbb"));
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }

    #[test]
    fn cell_edges() {
        assert_eq!(edges(&[0.0, 1.0, 3.0]), vec![-0.5, 0.5, 2.0, 4.0]);
    }
}
