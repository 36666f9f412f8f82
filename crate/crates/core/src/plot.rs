//! Static SVG rendering of datasets. Output is plain text and depends only
//! on the data, so identical inputs give identical files.

use std::fmt::Write as _;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 70.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub enum PlotKind {
    /// `y` columns on the left axis, `y2` columns on an optional right axis.
    Line { x: String, y: Vec<String>, y2: Vec<String> },
    /// Cells at distinct `(x, y)` pairs colored by `value`; non-finite values
    /// are drawn grey, darker when the `class` column says "unstable".
    Heatmap { x: String, y: String, value: String },
}

fn unsupported(kind: &str, reason: impl Into<String>) -> Error {
    Error::UnsupportedSchema { kind: kind.into(), reason: reason.into() }
}

fn column(ds: &Dataset, kind: &str, name: &str) -> Result<Vec<f64>> {
    ds.numeric(name).ok_or_else(|| unsupported(kind, format!("missing column `{name}`")))
}

fn finite_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }
    fn py(&self, y: f64, range: (f64, f64)) -> f64 {
        HEIGHT - BOTTOM - (y - range.0) / (range.1 - range.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn header(s: &mut String, title: &str) {
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(s: &mut String, f: &Frame, xlabel: &str, ylabel: &str, right: Option<((f64, f64), &str)>) {
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    let _ = writeln!(s, r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y0 - y1);
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let xv = f.x.0 + t * (f.x.1 - f.x.0);
        let px = f.px(xv);
        let _ = writeln!(s, r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{}" stroke="black"/>"#, y0 + 5.0);
        let _ = writeln!(s, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#, y0 + 18.0, tick(xv));
        let yv = f.y.0 + t * (f.y.1 - f.y.0);
        let py = f.py(yv, f.y);
        let _ = writeln!(s, r#"<line x1="{}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 8.0, py + 4.0, tick(yv));
        if let Some((r, _)) = right {
            let rv = r.0 + t * (r.1 - r.0);
            let py = f.py(rv, r);
            let _ = writeln!(s, r#"<line x1="{x1}" y1="{py:.2}" x2="{}" y2="{py:.2}" stroke="black"/>"#, x1 + 5.0);
            let _ = writeln!(s, r#"<text x="{}" y="{:.2}">{}</text>"#, x1 + 8.0, py + 4.0, tick(rv));
        }
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, HEIGHT - 12.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
    if let Some((_, label)) = right {
        let _ = writeln!(
            s,
            r#"<text x="{0}" y="{1}" text-anchor="middle" transform="rotate(90 {0} {1})">{2}</text>"#,
            WIDTH - 14.0,
            (y0 + y1) / 2.0,
            escape(label)
        );
    }
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e4).contains(&a) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

fn polyline(s: &mut String, f: &Frame, xs: &[f64], ys: &[f64], range: (f64, f64), color: &str, dashed: bool) {
    let mut segment = String::new();
    let flush = |seg: &mut String, s: &mut String| {
        if !seg.is_empty() {
            let dash = if dashed { r#" stroke-dasharray="6 3""# } else { "" };
            let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#, seg.trim_end());
            seg.clear();
        }
    };
    for (&x, &y) in xs.iter().zip(ys) {
        if x.is_finite() && y.is_finite() {
            let _ = write!(segment, "{:.2},{:.2} ", f.px(x), f.py(y, range));
        } else {
            flush(&mut segment, s);
        }
    }
    flush(&mut segment, s);
}

fn legend(s: &mut String, entries: &[(String, &str, bool)]) {
    for (k, (name, color, dashed)) in entries.iter().enumerate() {
        let y = TOP + 14.0 + 16.0 * k as f64;
        let dash = if *dashed { r#" stroke-dasharray="6 3""# } else { "" };
        let _ =
            writeln!(s, r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="1.5"{dash}/>"#, LEFT + 10.0, LEFT + 34.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, LEFT + 40.0, y + 4.0, escape(name));
    }
}

fn line_plot(ds: &Dataset, x: &str, y: &[String], y2: &[String], title: &str) -> Result<String> {
    if y.is_empty() {
        return Err(unsupported("line", "at least one y column is required"));
    }
    let xs = column(ds, "line", x)?;
    let left: Vec<Vec<f64>> = y.iter().map(|c| column(ds, "line", c)).collect::<Result<_>>()?;
    let right: Vec<Vec<f64>> = y2.iter().map(|c| column(ds, "line", c)).collect::<Result<_>>()?;
    let frame = Frame { x: finite_range(xs.iter().copied()), y: finite_range(left.iter().flatten().copied()) };
    let right_range = finite_range(right.iter().flatten().copied());

    let mut s = String::new();
    header(&mut s, title);
    let right_axis = (!y2.is_empty()).then(|| (right_range, y2.join(", ")));
    axes(&mut s, &frame, x, &y.join(", "), right_axis.as_ref().map(|(r, l)| (*r, l.as_str())));
    let mut entries = Vec::new();
    for (k, (name, ys)) in y.iter().zip(&left).enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        polyline(&mut s, &frame, &xs, ys, frame.y, color, false);
        entries.push((name.clone(), color, false));
    }
    for (k, (name, ys)) in y2.iter().zip(&right).enumerate() {
        let color = PALETTE[(y.len() + k) % PALETTE.len()];
        polyline(&mut s, &frame, &xs, ys, right_range, color, true);
        entries.push((name.clone(), color, true));
    }
    legend(&mut s, &entries);
    s.push_str("</svg>\n");
    Ok(s)
}

/// Perceptually ordered blue-to-yellow ramp.
fn ramp(t: f64) -> String {
    const STOPS: [(f64, f64, f64); 5] =
        [(68.0, 1.0, 84.0), (59.0, 82.0, 139.0), (33.0, 145.0, 140.0), (94.0, 201.0, 98.0), (253.0, 231.0, 37.0)];
    let t = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let k = (t.floor() as usize).min(STOPS.len() - 2);
    let f = t - k as f64;
    let (a, b) = (STOPS[k], STOPS[k + 1]);
    let mix = |p: f64, q: f64| (p + f * (q - p)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn distinct(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn heatmap(ds: &Dataset, x: &str, y: &str, value: &str, title: &str) -> Result<String> {
    let xs = column(ds, "heatmap", x)?;
    let ys = column(ds, "heatmap", y)?;
    let vs = column(ds, "heatmap", value)?;
    let class = ds.column_index("class");
    let (ux, uy) = (distinct(&xs), distinct(&ys));
    let half = |u: &[f64]| if u.len() > 1 { 0.5 * (u[1] - u[0]) } else { 0.5 };
    let (hx, hy) = (half(&ux), half(&uy));
    let frame = Frame {
        x: if ux.is_empty() { (0.0, 1.0) } else { (ux[0] - hx, ux[ux.len() - 1] + hx) },
        y: if uy.is_empty() { (0.0, 1.0) } else { (uy[0] - hy, uy[uy.len() - 1] + hy) },
    };
    let vrange = finite_range(vs.iter().copied());

    let mut s = String::new();
    header(&mut s, title);
    for (k, ((&cx, &cy), &v)) in xs.iter().zip(&ys).zip(&vs).enumerate() {
        if !cx.is_finite() || !cy.is_finite() {
            continue;
        }
        let fill = if v.is_finite() {
            ramp((v - vrange.0) / (vrange.1 - vrange.0))
        } else if class.is_some_and(|c| ds.rows[k][c].render() == "unstable") {
            "#555555".into()
        } else {
            "#d9d9d9".into()
        };
        let (x0, x1) = (frame.px(cx - hx), frame.px(cx + hx));
        let (y0, y1) = (frame.py(cy + hy, frame.y), frame.py(cy - hy, frame.y));
        let _ = writeln!(s, r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#, x1 - x0, y1 - y0);
    }
    axes(&mut s, &frame, x, y, None);
    // Color bar.
    let bx = WIDTH - RIGHT + 20.0;
    for k in 0..50 {
        let t = k as f64 / 49.0;
        let yy = HEIGHT - BOTTOM - t * (HEIGHT - TOP - BOTTOM);
        let _ = writeln!(
            s,
            r#"<rect x="{bx}" y="{:.2}" width="14" height="{:.2}" fill="{}"/>"#,
            yy - (HEIGHT - TOP - BOTTOM) / 49.0,
            (HEIGHT - TOP - BOTTOM) / 49.0 + 0.5,
            ramp(t)
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, bx - 4.0, TOP - 6.0, tick(vrange.1));
    let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, bx - 4.0, HEIGHT - BOTTOM + 14.0, tick(vrange.0));
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="10">{}</text>"#, bx - 10.0, HEIGHT - 12.0, escape(value));
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn render_plot(ds: &Dataset, kind: &PlotKind, title: &str) -> Result<String> {
    match kind {
        PlotKind::Line { x, y, y2 } => line_plot(ds, x, y, y2, title),
        PlotKind::Heatmap { x, y, value } => heatmap(ds, x, y, value, title),
    }
}
