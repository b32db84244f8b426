//! SVG figures: map, executed path colored by time, detections with direction arrows.

use std::fmt::Write as _;

use crate::detect::InvisibleHuman;
use crate::gridmap::{OccupancyGrid, WorldPoint};

const PX_PER_M: f64 = 50.0;
const MARGIN_M: f64 = 0.5;

struct Frame {
    min: WorldPoint,
    max: WorldPoint,
}

impl Frame {
    fn x(&self, p: WorldPoint) -> f64 {
        (p.x - self.min.x) * PX_PER_M
    }

    fn y(&self, p: WorldPoint) -> f64 {
        (self.max.y - p.y) * PX_PER_M
    }

    fn size(&self) -> (f64, f64) {
        (
            (self.max.x - self.min.x) * PX_PER_M,
            (self.max.y - self.min.y) * PX_PER_M,
        )
    }
}

fn frame(map: Option<&OccupancyGrid>, points: impl Iterator<Item = WorldPoint>) -> Frame {
    let mut min = WorldPoint::new(f64::INFINITY, f64::INFINITY);
    let mut max = WorldPoint::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut grow = |p: WorldPoint| {
        min = WorldPoint::new(min.x.min(p.x), min.y.min(p.y));
        max = WorldPoint::new(max.x.max(p.x), max.y.max(p.y));
    };
    if let Some(g) = map {
        let (w, h) = g.extent();
        grow(g.origin());
        grow(g.origin() + WorldPoint::new(w, h));
    }
    points.for_each(&mut grow);
    if !min.x.is_finite() {
        min = WorldPoint::default();
        max = WorldPoint::new(1.0, 1.0);
    }
    let m = WorldPoint::new(MARGIN_M, MARGIN_M);
    Frame { min: min - m, max: max + m }
}

fn draw_map(out: &mut String, f: &Frame, g: &OccupancyGrid) {
    let res = g.resolution();
    out.push_str("<g fill=\"#333\">\n");
    for row in 0..g.height() as i64 {
        let mut col = 0i64;
        while col < g.width() as i64 {
            if !g.cell_occupied(col, row) {
                col += 1;
                continue;
            }
            let start = col;
            while col < g.width() as i64 && g.cell_occupied(col, row) {
                col += 1;
            }
            let top_left = g.origin() + WorldPoint::new(start as f64 * res, (row + 1) as f64 * res);
            let _ = writeln!(
                out,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\"/>",
                f.x(top_left),
                f.y(top_left),
                (col - start) as f64 * res * PX_PER_M,
                res * PX_PER_M
            );
        }
    }
    out.push_str("</g>\n");
}

fn draw_path(out: &mut String, f: &Frame, path: &[WorldPoint]) {
    if path.is_empty() {
        return;
    }
    let (a, b) = (path[0], path[path.len() - 1]);
    let _ = writeln!(
        out,
        "<defs><linearGradient id=\"time\" gradientUnits=\"userSpaceOnUse\" x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\">\
<stop offset=\"0\" stop-color=\"#2b6cb0\"/><stop offset=\"1\" stop-color=\"#e53e3e\"/></linearGradient></defs>",
        f.x(a),
        f.y(a),
        f.x(b),
        f.y(b)
    );
    let pts: Vec<String> = path
        .iter()
        .map(|p| format!("{:.2},{:.2}", f.x(*p), f.y(*p)))
        .collect();
    let _ = writeln!(
        out,
        "<polyline class=\"path\" fill=\"none\" stroke=\"url(#time)\" stroke-width=\"3\" points=\"{}\"/>",
        pts.join(" ")
    );
}

fn draw_detections(out: &mut String, f: &Frame, detections: &[InvisibleHuman], h_rad: f64) {
    for d in detections {
        let tip = d.position + WorldPoint::from_polar(2.0 * h_rad, d.direction);
        let _ = writeln!(
            out,
            "<circle class=\"detection\" cx=\"{:.2}\" cy=\"{:.2}\" r=\"{:.2}\" fill=\"none\" stroke=\"#e53e3e\" stroke-width=\"2\"/>",
            f.x(d.position),
            f.y(d.position),
            h_rad * PX_PER_M
        );
        let _ = writeln!(
            out,
            "<line class=\"direction\" x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#e53e3e\" stroke-width=\"2\" marker-end=\"url(#arrow)\"/>",
            f.x(d.position),
            f.y(d.position),
            f.x(tip),
            f.y(tip)
        );
    }
}

/// Renders any combination of map, path and detections into one SVG document.
pub fn render_svg(
    map: Option<&OccupancyGrid>,
    path: &[WorldPoint],
    detections: &[InvisibleHuman],
    h_rad: f64,
) -> String {
    let f = frame(map, path.iter().copied().chain(detections.iter().map(|d| d.position)));
    let (w, h) = f.size();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.2} {h:.2}\">"
    );
    out.push_str("<defs><marker id=\"arrow\" markerWidth=\"6\" markerHeight=\"6\" refX=\"5\" refY=\"3\" orient=\"auto\"><path d=\"M0,0 L6,3 L0,6 z\" fill=\"#e53e3e\"/></marker></defs>\n");
    let _ = writeln!(out, "<rect width=\"{w:.2}\" height=\"{h:.2}\" fill=\"white\"/>");
    if let Some(g) = map {
        draw_map(&mut out, &f, g);
    }
    draw_path(&mut out, &f, path);
    draw_detections(&mut out, &f, detections, h_rad);
    out.push_str("</svg>\n");
    out
}
