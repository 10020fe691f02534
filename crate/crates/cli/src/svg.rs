//! Minimal hand-written SVG charts. Output depends only on the inputs.

use std::fmt::Write;

use dlmp_core::netmodel::VoltageLevel;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 140.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 48.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(title: &str) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{LEFT}" y="24" font-size="14">{}</text>"#, escape(title)).unwrap();
    s
}

/// Value axis with five labelled ticks from `lo` to `hi`.
fn y_axis(s: &mut String, lo: f64, hi: f64, y_of: impl Fn(f64) -> f64) {
    let x1 = WIDTH - RIGHT;
    writeln!(s, r##"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}" stroke="#333"/>"##, HEIGHT - BOTTOM).unwrap();
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let y = y_of(v);
        writeln!(s, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#ddd"/>"##).unwrap();
        writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{v:.1}</text>"#, LEFT - 6.0, y + 4.0).unwrap();
    }
    writeln!(
        s,
        r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">£/MWh</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    )
    .unwrap();
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(0.5);
    (lo - pad, hi + pad)
}

/// One polyline per series over `len` half-hours, with a bus-id legend.
pub fn lines(title: &str, len: usize, series: &[(u32, Vec<f64>)]) -> String {
    let (lo, hi) = padded_range(series.iter().flat_map(|(_, v)| v.iter().copied()));
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x_of = |t: usize| LEFT + plot_w * t as f64 / (len.max(2) - 1) as f64;
    let y_of = |v: f64| TOP + plot_h * (hi - v) / (hi - lo);

    let mut s = header(title);
    y_axis(&mut s, lo, hi, y_of);
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">half-hour</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    )
    .unwrap();
    for (k, (bus, values)) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let mut points = String::with_capacity(values.len() * 16);
        for (t, &v) in values.iter().enumerate().filter(|(_, v)| v.is_finite()) {
            if !points.is_empty() {
                points.push(' ');
            }
            write!(points, "{:.2},{:.2}", x_of(t), y_of(v)).unwrap();
        }
        writeln!(
            s,
            r#"<polyline data-bus="{bus}" fill="none" stroke="{colour}" stroke-width="1.2" points="{points}"/>"#
        )
        .unwrap();
        let ly = TOP + 18.0 * k as f64;
        let lx = WIDTH - RIGHT + 16.0;
        writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="3"/>"#,
            lx + 20.0
        )
        .unwrap();
        writeln!(s, r#"<text class="legend" x="{}" y="{}">{bus}</text>"#, lx + 26.0, ly + 4.0).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// One bar per voltage level, highest voltage first.
pub fn bars(title: &str, values: &[(VoltageLevel, f64)]) -> String {
    let (lo, hi) = padded_range(values.iter().map(|&(_, v)| v).chain([0.0]));
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let y_of = |v: f64| TOP + plot_h * (hi - v) / (hi - lo);
    let slot = plot_w / values.len().max(1) as f64;

    let mut s = header(title);
    y_axis(&mut s, lo, hi, y_of);
    for (k, &(level, v)) in values.iter().enumerate() {
        let x = LEFT + slot * k as f64 + slot * 0.2;
        let (top, bottom) = (y_of(v.max(0.0)), y_of(v.min(0.0)));
        writeln!(
            s,
            r#"<rect class="bar" data-kv="{}" data-value="{v:.4}" x="{x:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
            level.kv(),
            slot * 0.6,
            bottom - top,
            PALETTE[k % PALETTE.len()]
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{} kV</text>"#,
            x + slot * 0.3,
            HEIGHT - BOTTOM + 18.0,
            level.kv()
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}
