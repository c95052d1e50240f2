//! Minimal SVG emitters: one line plot and one grid heatmap. Both are pure
//! views of data that has already been written elsewhere.

use std::fmt::Write;

use phimin_core::Grid;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn label(v: f64) -> String {
    if v == 0.0 || (1e-3..1e4).contains(&v.abs()) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn finite_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if lo > hi {
        return None;
    }
    Some(if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    })
}

/// Polyline of `(x, y)` pairs with labelled axes. Non-finite points break the
/// line.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let (Some((x0, x1)), Some((y0, y1))) = (
        finite_range(points.iter().map(|p| p.0)),
        finite_range(points.iter().map(|p| p.1)),
    ) else {
        out.push_str("</svg>\n");
        return out;
    };
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * ph;
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let mut segment = String::new();
    let flush = |segment: &mut String, out: &mut String| {
        if !segment.is_empty() {
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#,
                segment.trim_end()
            );
            segment.clear();
        }
    };
    for &(x, y) in points {
        if x.is_finite() && y.is_finite() {
            let _ = write!(segment, "{:.2},{:.2} ", sx(x), sy(y));
        } else {
            flush(&mut segment, &mut out);
        }
    }
    flush(&mut segment, &mut out);
    let bottom = HEIGHT - MARGIN;
    for (v, anchor, x) in [(x0, "start", MARGIN), (x1, "end", WIDTH - MARGIN)] {
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{}" text-anchor="{anchor}">{}</text>"#,
            bottom + 16.0,
            label(v)
        );
    }
    for (v, y) in [(y0, bottom), (y1, MARGIN + 10.0)] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{y}" text-anchor="end">{}</text>"#,
            MARGIN - 6.0,
            label(v)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    out.push_str("</svg>\n");
    out
}

/// Blue-white-red ramp for `t` in `[0, 1]`.
fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        let s = t / 0.5;
        (40.0 + 215.0 * s, 90.0 + 165.0 * s, 200.0 + 55.0 * s)
    } else {
        let s = (t - 0.5) / 0.5;
        (255.0 - 35.0 * s, 255.0 - 195.0 * s, 255.0 - 205.0 * s)
    };
    format!("#{:02x}{:02x}{:02x}", r as u8, g as u8, b as u8)
}

/// One cell per node, `x` to the right and `y` upwards; `NaN` cells are grey.
pub fn heatmap(title: &str, grid: &Grid, field: &[f64]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let (lo, hi) = finite_range(field.iter().copied()).unwrap_or((0.0, 1.0));
    let (pw, ph) = (WIDTH - 2.0 * MARGIN - 60.0, HEIGHT - 2.0 * MARGIN);
    let (cw, ch) = (pw / grid.nx as f64, ph / grid.ny as f64);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let v = field[grid.idx(i, j)];
            let fill = if v.is_finite() {
                ramp((v - lo) / (hi - lo))
            } else {
                "#b0b0b0".to_owned()
            };
            let _ = writeln!(
                out,
                r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{fill}"/>"#,
                MARGIN + i as f64 * cw,
                HEIGHT - MARGIN - (j + 1) as f64 * ch,
                cw + 0.05,
                ch + 0.05
            );
        }
    }
    let bottom = HEIGHT - MARGIN;
    for (v, anchor, x) in [(grid.x0, "start", MARGIN), (grid.x1, "end", MARGIN + pw)] {
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{}" text-anchor="{anchor}">{}</text>"#,
            bottom + 16.0,
            label(v)
        );
    }
    for (v, y) in [(grid.y0, bottom), (grid.y1, MARGIN + 10.0)] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{y}" text-anchor="end">{}</text>"#,
            MARGIN - 6.0,
            label(v)
        );
    }
    let bar_x = MARGIN + pw + 20.0;
    let steps = 32;
    for k in 0..steps {
        let _ = writeln!(
            out,
            r#"<rect x="{bar_x}" y="{:.3}" width="16" height="{:.3}" fill="{}"/>"#,
            bottom - (k + 1) as f64 * ph / steps as f64,
            ph / steps as f64 + 0.05,
            ramp((k as f64 + 0.5) / steps as f64)
        );
    }
    for (v, y) in [(lo, bottom), (hi, MARGIN + 10.0)] {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{y}">{}</text>"#,
            bar_x + 20.0,
            label(v)
        );
    }
    out.push_str("</svg>\n");
    out
}
