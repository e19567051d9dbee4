//! Deterministic SVG figures of rank-2 diagrams with overlays.

use std::fmt::Write;

use csd_core::brokenline::{BrokenLine, Segment};
use csd_core::lattice::{LatticePoint, RatPoint};
use csd_core::scattering::{Diagram, WallKind};
use num_traits::ToPrimitive;

const SIZE: f64 = 640.0;
const MARGIN: f64 = 24.0;

/// Things drawn on top of the walls.
#[derive(Clone, Debug, Default)]
pub struct Overlays {
    pub broken_lines: Vec<BrokenLine>,
    pub segments: Vec<Segment>,
    pub polygons: Vec<Vec<RatPoint>>,
}

struct View {
    radius: f64,
}

impl View {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let s = (SIZE / 2.0 - MARGIN) / self.radius;
        (SIZE / 2.0 + x * s, SIZE / 2.0 - y * s)
    }
}

fn f(p: &RatPoint) -> (f64, f64) {
    (p.0[0].to_f64().unwrap_or(0.0), p.0[1].to_f64().unwrap_or(0.0))
}

fn unit(v: &LatticePoint) -> (f64, f64) {
    let (x, y) = f(&v.to_rat());
    let n = (x * x + y * y).sqrt();
    (x / n, y / n)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn polyline(out: &mut String, view: &View, pts: &[(f64, f64)], style: &str) {
    let coords: Vec<String> = pts
        .iter()
        .map(|&(x, y)| {
            let (u, v) = view.map(x, y);
            format!("{u:.3},{v:.3}")
        })
        .collect();
    let _ = writeln!(out, r#"<polyline points="{}" {style}/>"#, coords.join(" "));
}

fn label(out: &mut String, view: &View, x: f64, y: f64, text: &str, class: &str) {
    let (u, v) = view.map(x, y);
    let _ = writeln!(out, r#"<text x="{u:.3}" y="{v:.3}" class="{class}">{}</text>"#, escape(text));
}

fn extent(o: &Overlays) -> f64 {
    let mut r: f64 = 3.0;
    let mut see = |p: &RatPoint| {
        let (x, y) = f(p);
        r = r.max(x.abs() + 1.0).max(y.abs() + 1.0);
    };
    for l in &o.broken_lines {
        see(&l.endpoint);
        for p in &l.pieces {
            if let Some(b) = &p.bend {
                see(&b.point);
            }
        }
    }
    for s in &o.segments {
        s.polyline().iter().for_each(&mut see);
    }
    o.polygons.iter().flatten().for_each(&mut see);
    r
}

/// Renders the walls of `d` (rays and lines labeled with their functions)
/// and the overlays as polylines labeled with their monomials.
pub fn render(d: &Diagram, overlays: &Overlays) -> String {
    let view = View { radius: extent(overlays) };
    let r = view.radius;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    out.push_str("<style>text{font-family:monospace;font-size:11px}.wall{fill:#333}.mono{fill:#a33}</style>\n");
    let _ = writeln!(out, r##"<rect width="{SIZE}" height="{SIZE}" fill="#fff"/>"##);
    for poly in &overlays.polygons {
        let pts: Vec<String> = poly
            .iter()
            .map(|p| {
                let (x, y) = f(p);
                let (u, v) = view.map(x, y);
                format!("{u:.3},{v:.3}")
            })
            .collect();
        let _ = writeln!(out, r##"<polygon points="{}" fill="#cde" stroke="#579" stroke-width="1.5"/>"##, pts.join(" "));
    }
    for (i, w) in d.walls.iter().enumerate() {
        let color = match w.classify() {
            WallKind::Incoming => "#000",
            WallKind::Outgoing => "#777",
        };
        let rays = w.rays();
        for ray in &rays {
            let (x, y) = unit(ray);
            polyline(&mut out, &view, &[(0.0, 0.0), (x * r, y * r)], &format!(r#"stroke="{color}" stroke-width="1.5" fill="none""#));
        }
        let (x, y) = unit(&rays[0]);
        let shift = 0.35 * (i % 3) as f64;
        label(&mut out, &view, x * (r * 0.8 - shift), y * (r * 0.8 - shift), &w.func.to_string(), "wall");
    }
    for l in &overlays.broken_lines {
        // pieces run from the unbounded end to the endpoint
        let mut pts = vec![f(&l.endpoint)];
        for k in (1..l.pieces.len()).rev() {
            if let Some(b) = &l.pieces[k].bend {
                pts.push(f(&b.point));
            }
        }
        let (ux, uy) = unit(&l.pieces[0].exponent);
        let last = *pts.last().unwrap_or(&(0.0, 0.0));
        pts.push((last.0 + ux * 2.0 * r, last.1 + uy * 2.0 * r));
        pts.reverse();
        polyline(&mut out, &view, &pts, r##"stroke="#c33" stroke-width="1.2" fill="none""##);
        for (k, p) in l.pieces.iter().enumerate() {
            let a = pts[k];
            let b = pts[k + 1];
            let text = format!("{}z^{}", p.coeff, p.exponent);
            label(&mut out, &view, (a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0, &text, "mono");
        }
    }
    for s in &overlays.segments {
        let pts: Vec<(f64, f64)> = (0..=s.pieces.len()).map(|k| f(&s.junction(k))).collect();
        polyline(&mut out, &view, &pts, r##"stroke="#393" stroke-width="1.2" fill="none""##);
        for (k, p) in s.pieces.iter().enumerate() {
            let (a, b) = (pts[k], pts[k + 1]);
            label(&mut out, &view, (a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0, &format!("{}z^{}", p.coeff, p.exponent), "mono");
        }
    }
    out.push_str("</svg>\n");
    out
}
