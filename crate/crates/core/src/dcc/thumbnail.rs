//! Deterministic SVG thumbnails: an orthographic projection onto the XZ plane
//! (x to the right, z up) with one labeled rectangle per object footprint.
//! Footprints are axis-aligned; rotation is not drawn.

use std::fmt::Write as _;

use super::scene::{ObjectKind, Scene, SceneObject};
use crate::canon::fmt_fixed2;

pub const THUMBNAIL_SIZE: f64 = 512.0;
const MARGIN: f64 = 32.0;
const MARKER: f64 = 0.2;
const MIN_THICKNESS: f64 = 0.02;

/// Footprint as (min_x, min_z, max_x, max_z) in scene units.
pub fn footprint(o: &SceneObject) -> (f64, f64, f64, f64) {
    let p = |k: &str, d: f64| o.params.get(k).and_then(|v| v.as_num()).unwrap_or(d);
    let (w, h) = match o.kind {
        ObjectKind::Cube => (p("width", 1.0), p("height", 1.0)),
        ObjectKind::Cylinder => (2.0 * p("radius", 0.5), p("height", 1.0)),
        ObjectKind::Plane => (p("width", 1.0), MIN_THICKNESS),
        ObjectKind::Light | ObjectKind::Group | ObjectKind::Custom => (MARKER, MARKER),
    };
    let w = (w.abs() * o.transform.scale[0]).max(MIN_THICKNESS);
    let h = (h.abs() * o.transform.scale[2]).max(MIN_THICKNESS);
    let [x, _, z] = o.transform.translation;
    (x - w / 2.0, z - h / 2.0, x + w / 2.0, z + h / 2.0)
}

fn fill(o: &SceneObject) -> &str {
    if let Some(e) = &o.emissive {
        return &e.color;
    }
    match o.kind {
        ObjectKind::Cube => "#c8ccd4",
        ObjectKind::Cylinder => "#b4c8dc",
        ObjectKind::Plane => "#d8d0c0",
        ObjectKind::Light => "#f4e27a",
        ObjectKind::Group => "#e0e0e0",
        ObjectKind::Custom => "#d0c0e0",
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render_thumbnail(scene: &Scene) -> String {
    let boxes: Vec<_> = scene.objects().map(|o| (o, footprint(o))).collect();
    let (mut x0, mut z0, mut x1, mut z1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for (_, (a, b, c, d)) in &boxes {
        x0 = x0.min(*a);
        z0 = z0.min(*b);
        x1 = x1.max(*c);
        z1 = z1.max(*d);
    }
    if boxes.is_empty() {
        (x0, z0, x1, z1) = (-1.0, -1.0, 1.0, 1.0);
    }
    let inner = THUMBNAIL_SIZE - 2.0 * MARGIN;
    let scale = (inner / (x1 - x0)).min(inner / (z1 - z0));
    let off_x = MARGIN + (inner - (x1 - x0) * scale) / 2.0;
    let off_y = MARGIN + (inner - (z1 - z0) * scale) / 2.0;
    let px = |x: f64| off_x + (x - x0) * scale;
    let py = |z: f64| THUMBNAIL_SIZE - (off_y + (z - z0) * scale);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="512" height="512" viewBox="0 0 512 512">"#
    );
    let _ = writeln!(svg, r##"<rect x="0" y="0" width="512" height="512" fill="#1e2026"/>"##);
    for (o, (a, b, c, d)) in &boxes {
        let _ = writeln!(
            svg,
            r##"<rect x="{}" y="{}" width="{}" height="{}" fill="{}" fill-opacity="0.6" stroke="#f0f0f0" stroke-width="1"/>"##,
            fmt_fixed2(px(*a)),
            fmt_fixed2(py(*d)),
            fmt_fixed2((c - a) * scale),
            fmt_fixed2((d - b) * scale),
            escape(fill(o)),
        );
        let _ = writeln!(
            svg,
            r##"<text x="{}" y="{}" font-family="monospace" font-size="10" fill="#ffffff" text-anchor="middle">{}</text>"##,
            fmt_fixed2(px((a + c) / 2.0)),
            fmt_fixed2(py((b + d) / 2.0)),
            escape(&o.name),
        );
    }
    svg.push_str("</svg>\n");
    svg
}
