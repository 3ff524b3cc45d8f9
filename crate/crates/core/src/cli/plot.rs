//! R-X plane rendering of a sweep CSV as a self-contained SVG.
//!
//! The canvas is fixed at 800×800 with equal R and X scales. Every number is
//! printed with a fixed precision, so equal input gives byte-identical output.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::adaptive::AdaptiveContext;
use crate::relay::{zone2_adaptive, Zone};

use super::report::CsvTable;

pub const CANVAS: f64 = 800.0;
const MARGIN: f64 = 70.0;

const ZONE_COLORS: [&str; 4] = ["#7f7f7f", "#d62728", "#1f77b4", "#2ca02c"];

/// Affine map from the R-X plane (Ω) to canvas pixels, y pointing down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub r_min: f64,
    pub x_min: f64,
    pub span: f64,
}

impl Frame {
    /// Smallest square view holding every point, padded by 5% per side.
    pub fn fit(points: impl IntoIterator<Item = Complex64>) -> Self {
        let (mut r0, mut r1, mut x0, mut x1) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for p in points {
            r0 = r0.min(p.re);
            r1 = r1.max(p.re);
            x0 = x0.min(p.im);
            x1 = x1.max(p.im);
        }
        let span = (r1 - r0).max(x1 - x0).max(1e-9) * 1.1;
        Frame { r_min: 0.5 * (r0 + r1) - 0.5 * span, x_min: 0.5 * (x0 + x1) - 0.5 * span, span }
    }

    pub fn scale(&self) -> f64 {
        (CANVAS - 2.0 * MARGIN) / self.span
    }

    pub fn to_px(&self, z: Complex64) -> (f64, f64) {
        let s = self.scale();
        (MARGIN + (z.re - self.r_min) * s, CANVAS - MARGIN - (z.im - self.x_min) * s)
    }
}

struct Point {
    z: Complex64,
    zone: u8,
    k: Option<Complex64>,
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 8.0;
    let mag = 10f64.powf(raw.log10().floor());
    let m = raw / mag;
    let f = if m < 1.5 {
        1.0
    } else if m < 3.5 {
        2.0
    } else if m < 7.5 {
        5.0
    } else {
        10.0
    };
    f * mag
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 { 0 } else { (-step.log10().floor()) as usize };
    let s = format!("{:.*}", decimals, v);
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

/// Render `csv` (sweep format). Points are colored by `zone_adaptive` when
/// `adaptive` is set, else by `zone_static`; the adaptive zone-2 circles of
/// every row are drawn dashed.
pub fn render(csv: &str, ctx: &AdaptiveContext, adaptive: bool) -> Result<String, String> {
    let table = CsvTable::parse(csv)?;
    let zr = table.column("z_re")?;
    let zi = table.column("z_im")?;
    let zone_col = table.column(if adaptive { "zone_adaptive" } else { "zone_static" })?;
    let k_cols = if adaptive { Some((table.column("k_re")?, table.column("k_im")?)) } else { None };

    let mut points = Vec::with_capacity(table.rows.len());
    for i in 0..table.rows.len() {
        let zone = table.number(i, zone_col)?;
        if !(zone == 0.0 || zone == 1.0 || zone == 2.0 || zone == 3.0) {
            return Err(format!("row {}: zone must be 0-3, got {zone}", i + 1));
        }
        let k = match k_cols {
            Some((a, b)) => Some(Complex64::new(table.number(i, a)?, table.number(i, b)?)),
            None => None,
        };
        points.push(Point { z: Complex64::new(table.number(i, zr)?, table.number(i, zi)?), zone: zone as u8, k });
    }

    let st = ctx.static_settings;
    let reaches: Vec<(Zone, Complex64)> = Zone::ALL.iter().map(|&z| (z, st.reach(z))).collect();
    let mut adaptive_reaches = Vec::new();
    let mut seen = BTreeSet::new();
    for p in &points {
        if let Some(k) = p.k {
            let reach = zone2_adaptive(ctx.z_ab, &ctx.remote_z1s, ctx.k_mode.apply(k)).unwrap_or(st.z2_reach);
            if seen.insert(format!("{:.3},{:.3}", reach.re, reach.im)) {
                adaptive_reaches.push(reach);
            }
        }
    }

    let circle_extent = |r: Complex64| {
        let c = r * 0.5;
        let rad = r.norm() * 0.5;
        [c + Complex64::new(rad, rad), c - Complex64::new(rad, rad)]
    };
    let frame = Frame::fit(
        reaches.iter().map(|(_, r)| *r).chain(adaptive_reaches.iter().copied()).flat_map(circle_extent).chain(points.iter().map(|p| p.z)),
    );
    let scale = frame.scale();

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{c}" height="{c}" viewBox="0 0 {c} {c}" font-family="sans-serif" font-size="12">"#,
        c = CANVAS
    );
    let _ = writeln!(s, r##"<rect x="0" y="0" width="{c}" height="{c}" fill="#ffffff"/>"##, c = CANVAS);

    // grid and axes
    let step = nice_step(frame.span);
    let lo = (MARGIN, CANVAS - MARGIN);
    let mut v = (frame.r_min / step).ceil() * step;
    while v <= frame.r_min + frame.span + 1e-9 * step {
        let (x, _) = frame.to_px(Complex64::new(v, 0.0));
        let _ = writeln!(s, r##"<line x1="{x:.3}" y1="{:.3}" x2="{x:.3}" y2="{:.3}" stroke="#e6e6e6"/>"##, lo.0, lo.1);
        let _ = writeln!(s, r#"<text x="{x:.3}" y="{:.3}" text-anchor="middle">{}</text>"#, lo.1 + 16.0, tick_label(v, step));
        v += step;
    }
    let mut v = (frame.x_min / step).ceil() * step;
    while v <= frame.x_min + frame.span + 1e-9 * step {
        let (_, y) = frame.to_px(Complex64::new(0.0, v));
        let _ = writeln!(s, r##"<line x1="{:.3}" y1="{y:.3}" x2="{:.3}" y2="{y:.3}" stroke="#e6e6e6"/>"##, lo.0, lo.1);
        let _ = writeln!(s, r#"<text x="{:.3}" y="{:.3}" text-anchor="end">{}</text>"#, lo.0 - 6.0, y + 4.0, tick_label(v, step));
        v += step;
    }
    let (ox, oy) = frame.to_px(Complex64::new(0.0, 0.0));
    let _ = writeln!(s, r##"<line x1="{:.3}" y1="{oy:.3}" x2="{:.3}" y2="{oy:.3}" stroke="#000000"/>"##, lo.0, lo.1);
    let _ = writeln!(s, r##"<line x1="{ox:.3}" y1="{:.3}" x2="{ox:.3}" y2="{:.3}" stroke="#000000"/>"##, lo.0, lo.1);
    let _ = writeln!(s, r#"<text x="{:.3}" y="{:.3}" text-anchor="middle">R (ohm)</text>"#, CANVAS / 2.0, CANVAS - 20.0);
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.3}" text-anchor="middle" transform="rotate(-90 20 {:.3})">X (ohm)</text>"#,
        CANVAS / 2.0,
        CANVAS / 2.0
    );
    let title = if adaptive { "Seen impedance, adaptive zone 2" } else { "Seen impedance, static zones" };
    let _ = writeln!(s, r#"<text x="{:.3}" y="30" text-anchor="middle" font-size="16">{title}</text>"#, CANVAS / 2.0);

    // characteristics
    for (zone, reach) in &reaches {
        let (cx, cy) = frame.to_px(*reach * 0.5);
        let _ = writeln!(
            s,
            r#"<circle cx="{cx:.3}" cy="{cy:.3}" r="{:.3}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            reach.norm() * 0.5 * scale,
            ZONE_COLORS[zone.number() as usize]
        );
    }
    for reach in &adaptive_reaches {
        let (cx, cy) = frame.to_px(*reach * 0.5);
        let _ = writeln!(
            s,
            r#"<circle cx="{cx:.3}" cy="{cy:.3}" r="{:.3}" fill="none" stroke="{}" stroke-width="0.75" stroke-dasharray="4 3" stroke-opacity="0.6"/>"#,
            reach.norm() * 0.5 * scale,
            ZONE_COLORS[2]
        );
    }

    // locus
    if points.len() > 1 {
        let path: Vec<String> = points
            .iter()
            .map(|p| {
                let (x, y) = frame.to_px(p.z);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#555555" stroke-width="0.75"/>"##, path.join(" "));
    }
    for p in &points {
        let (x, y) = frame.to_px(p.z);
        let _ = writeln!(s, r#"<circle cx="{x:.3}" cy="{y:.3}" r="3" fill="{}"/>"#, ZONE_COLORS[p.zone as usize]);
    }

    // legend
    let labels = ["outside", "zone 1", "zone 2", "zone 3"];
    for (i, label) in labels.iter().enumerate() {
        let y = 50.0 + 16.0 * i as f64;
        let _ = writeln!(s, r#"<circle cx="{:.3}" cy="{y:.3}" r="4" fill="{}"/>"#, CANVAS - 120.0, ZONE_COLORS[i]);
        let _ = writeln!(s, r#"<text x="{:.3}" y="{:.3}">{label}</text>"#, CANVAS - 110.0, y + 4.0);
    }
    let _ = writeln!(s, "</svg>");
    Ok(s)
}
