//! Independent oracles shared by the integration tests.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(dead_code)]

use std::f64::consts::PI;

use occnav::detect::{DetectionParams, InvisibleHuman};
use occnav::gridmap::{OccupancyGrid, WorldPoint};
use occnav::scan::{LaserScan, Pose2D};
use rand::Rng;

/// Both perpendicular offsets of `p` by `d`, found by rotating the unit direction
/// +90 and -90 degrees and sorting them by the cross-product sign. Returns
/// `(right, left)`.
pub fn offsets_by_rotation(v1: WorldPoint, v2: WorldPoint, p: WorldPoint, d: f64) -> (WorldPoint, WorldPoint) {
    let e = v2 - v1;
    let len = (e.x * e.x + e.y * e.y).sqrt();
    let (ux, uy) = (e.x / len, e.y / len);
    let a = WorldPoint::new(p.x - d * uy, p.y + d * ux); // +90 deg
    let b = WorldPoint::new(p.x + d * uy, p.y - d * ux); // -90 deg
    let cross = |q: WorldPoint| e.x * (q.y - p.y) - e.y * (q.x - p.x);
    if cross(a) < 0.0 {
        (a, b)
    } else {
        (b, a)
    }
}

fn wrap(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Range of the ray nearest in angle to the bearing of `h`, by brute force over all
/// rays (ties to the lower index).
pub fn brute_range_toward(scan: &LaserScan, h: WorldPoint) -> f64 {
    let d = h - scan.pose.position;
    let beta = d.y.atan2(d.x) - scan.pose.heading;
    let mut best = (f64::INFINITY, 0usize);
    for i in 0..scan.ranges.len() {
        let ang = scan.config.angle_min + i as f64 * scan.config.increment();
        let diff = wrap(beta - ang).abs();
        if diff < best.0 - 1e-12 {
            best = (diff, i);
        }
    }
    scan.ranges[best.1]
}

/// Closed disc against every occupied cell square and the map border.
pub fn brute_disc_free(grid: &OccupancyGrid, c: WorldPoint, r: f64) -> bool {
    let o = grid.origin();
    let (w, h) = grid.extent();
    if c.x - r <= o.x || c.y - r <= o.y || c.x + r >= o.x + w || c.y + r >= o.y + h {
        return false;
    }
    let res = grid.resolution();
    for row in 0..grid.height() {
        for col in 0..grid.width() {
            if !grid.cells()[row * grid.width() + col] {
                continue;
            }
            let x0 = o.x + col as f64 * res;
            let y0 = o.y + row as f64 * res;
            let dx = (x0 - c.x).max(0.0).max(c.x - (x0 + res));
            let dy = (y0 - c.y).max(0.0).max(c.y - (y0 + res));
            if dx * dx + dy * dy <= r * r {
                return false;
            }
        }
    }
    true
}

/// Gap edge of a detection in ray order.
pub fn gap_edge(scan: &LaserScan, h: &InvisibleHuman) -> (WorldPoint, WorldPoint) {
    (scan.endpoint(h.gap_index), scan.endpoint(h.gap_index + 1))
}

pub fn line_distance(a: WorldPoint, b: WorldPoint, p: WorldPoint) -> f64 {
    let e = b - a;
    (e.x * (p.y - a.y) - e.y * (p.x - a.x)).abs() / e.norm()
}

pub fn segment_distance(a: WorldPoint, b: WorldPoint, p: WorldPoint) -> f64 {
    let e = b - a;
    let t = ((p - a).dot(e) / e.dot(e)).clamp(0.0, 1.0);
    p.distance(a + e * t)
}

/// Every soundness condition a returned detection must meet; empty when sound.
pub fn soundness_violations(
    grid: &OccupancyGrid,
    scan: &LaserScan,
    h: &InvisibleHuman,
    params: &DetectionParams,
) -> Vec<String> {
    let mut v = Vec::new();
    let r = h.position - scan.pose.position;
    let rho = brute_range_toward(scan, h.position);
    if !(r.norm() > rho) {
        v.push(format!("not strictly outside contour: |r|={} rho={}", r.norm(), rho));
    }
    if !brute_disc_free(grid, h.position, params.h_rad) {
        v.push("disc collides".to_string());
    }
    let (a, b) = gap_edge(scan, h);
    let cross = (b - a).cross(h.position - a);
    if !(cross < 0.0) {
        v.push(format!("not right of the gap edge (cross {cross})"));
    }
    let dist = line_distance(a, b, h.position);
    if (dist - params.offset()).abs() > 1e-6 {
        v.push(format!("perpendicular distance {dist} != {}", params.offset()));
    }
    v
}

/// Random free poses whose position keeps `clearance` from every obstacle.
pub fn free_poses(grid: &OccupancyGrid, rng: &mut impl Rng, n: usize, clearance: f64) -> Vec<Pose2D> {
    let mut out = Vec::new();
    let (w, h) = grid.extent();
    let o = grid.origin();
    let mut tries = 0;
    while out.len() < n && tries < 100_000 {
        tries += 1;
        let p = WorldPoint::new(o.x + rng.gen_range(0.0..w), o.y + rng.gen_range(0.0..h));
        if grid.is_occupied(p) || grid.circle_overlaps(p, clearance) {
            continue;
        }
        out.push(Pose2D::new(p.x, p.y, rng.gen_range(-PI..PI)));
    }
    out
}

/// Exhaustive emergence oracle for one gap edge: sub-lattice points on the hidden side
/// of the edge, within its span, at the candidate offset band, strictly outside the
/// contour and with a collision-free disc.
pub fn oracle_feasible_points(
    grid: &OccupancyGrid,
    scan: &LaserScan,
    a: WorldPoint,
    b: WorldPoint,
    params: &DetectionParams,
) -> Vec<WorldPoint> {
    let res = grid.resolution();
    let step = res / 4.0;
    let e = b - a;
    let len = e.norm();
    let band = res / 2.0;
    let reach = params.offset() + band;
    let min = WorldPoint::new(a.x.min(b.x) - reach, a.y.min(b.y) - reach);
    let max = WorldPoint::new(a.x.max(b.x) + reach, a.y.max(b.y) + reach);
    let mut out = Vec::new();
    let nx = ((max.x - min.x) / step).ceil() as usize;
    let ny = ((max.y - min.y) / step).ceil() as usize;
    for iy in 0..=ny {
        for ix in 0..=nx {
            let q = WorldPoint::new(min.x + ix as f64 * step, min.y + iy as f64 * step);
            let along = (q - a).dot(e) / len;
            if !(0.0..=len).contains(&along) {
                continue;
            }
            if !(e.cross(q - a) < 0.0) {
                continue;
            }
            if (line_distance(a, b, q) - params.offset()).abs() > band {
                continue;
            }
            if !((q - scan.pose.position).norm() > brute_range_toward(scan, q)) {
                continue;
            }
            if grid.is_occupied(q) || !brute_disc_free(grid, q, params.h_rad) {
                continue;
            }
            out.push(q);
        }
    }
    out
}
