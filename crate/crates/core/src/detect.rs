//! Contour gaps, corners and invisible-human placement.
//!
//! Scan endpoints taken in ray order form an anticlockwise polygon (the laser contour).
//! Consecutive endpoints more than `gap_threshold` apart bound a gap edge; the endpoint
//! nearer to the robot is a corner, and anything hidden behind it lies to the right of
//! the gap edge when the edge is directed in ray order. The search walks a point along
//! the gap edge starting at the corner and places a candidate human disc at a fixed
//! perpendicular offset on the hidden side until it is both outside the contour and
//! free of obstacles.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridmap::{OccupancyGrid, WorldPoint};
use crate::scan::{simulate_scan, LaserScan, Pose2D, ScanConfig, ScanError};

#[derive(Error, Debug, PartialEq)]
pub enum GeometryError {
    #[error("degenerate segment: both endpoints are {0}")]
    DegenerateSegment(WorldPoint),
    #[error("offset distance must be finite and non-negative, got {0}")]
    InvalidDistance(f64),
}

/// Tunables for gap detection and human placement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionParams {
    /// Minimum separation (m) of consecutive endpoints that counts as a gap.
    pub gap_threshold: f64,
    /// Human radius (m).
    pub h_rad: f64,
    /// Extra clearance added to the human radius for the perpendicular offset (m).
    pub epsilon: f64,
    /// Walk step as a fraction of `h_rad + epsilon`.
    pub alpha: f64,
    /// Number of lateral probes on each side of a candidate.
    pub k: usize,
    /// Corners farther than this from the robot are ignored (m).
    pub front_limit: f64,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            gap_threshold: 0.5,
            h_rad: 0.3,
            epsilon: 0.15,
            alpha: 0.2,
            k: 10,
            front_limit: 5.0,
        }
    }
}

impl DetectionParams {
    /// Perpendicular offset of a candidate from the gap edge.
    pub fn offset(&self) -> f64 {
        self.h_rad + self.epsilon
    }

    pub fn step(&self) -> f64 {
        self.alpha * self.offset()
    }
}

/// Two consecutive scan endpoints separated by more than the gap threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VertexPair {
    /// Corner: the endpoint nearer to the robot.
    pub v1: WorldPoint,
    /// The far endpoint.
    pub v2: WorldPoint,
    /// Lower ray index of the pair.
    pub index1: usize,
    /// `index1 + 1`.
    pub index2: usize,
    /// Ray index of `v1` (either `index1` or `index2`).
    pub corner_index: usize,
    pub separation: f64,
}

impl VertexPair {
    /// The gap edge directed in ray (anticlockwise) order; hidden space is on its right.
    pub fn contour_edge(&self) -> (WorldPoint, WorldPoint) {
        if self.corner_index == self.index1 {
            (self.v1, self.v2)
        } else {
            (self.v2, self.v1)
        }
    }

    fn corner_first(&self) -> bool {
        self.corner_index == self.index1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvisibleHuman {
    pub position: WorldPoint,
    /// Heading of the assumed motion, always toward the robot.
    pub direction: f64,
    pub source_corner: WorldPoint,
    /// Scan ray index of the source corner.
    pub corner_index: usize,
    /// Lower ray index of the gap the detection came from; the gap edge runs from
    /// endpoint `gap_index` to endpoint `gap_index + 1`.
    pub gap_index: usize,
    pub distance_to_robot: f64,
}

fn perpendicular(v1: WorldPoint, v2: WorldPoint, d: f64) -> Result<WorldPoint, GeometryError> {
    if !(d >= 0.0) || !d.is_finite() {
        return Err(GeometryError::InvalidDistance(d));
    }
    let e = v2 - v1;
    let len = e.norm();
    if len == 0.0 {
        return Err(GeometryError::DegenerateSegment(v1));
    }
    Ok(WorldPoint::new(d * e.y / len, -d * e.x / len))
}

/// Point at distance `d` from `p`, perpendicular to `v1 -> v2`, on its right side.
pub fn offset_right(
    v1: WorldPoint,
    v2: WorldPoint,
    p: WorldPoint,
    d: f64,
) -> Result<WorldPoint, GeometryError> {
    let n = perpendicular(v1, v2, d)?;
    Ok(WorldPoint::new(p.x + n.x, p.y + n.y))
}

/// Mirror of [`offset_right`] on the left side of `v1 -> v2`.
pub fn offset_left(
    v1: WorldPoint,
    v2: WorldPoint,
    p: WorldPoint,
    d: f64,
) -> Result<WorldPoint, GeometryError> {
    let n = perpendicular(v1, v2, d)?;
    Ok(WorldPoint::new(p.x - n.x, p.y - n.y))
}

/// Consecutive-ray endpoint gaps in front of the robot and within the front limit.
pub fn find_gap_pairs(scan: &LaserScan, params: &DetectionParams) -> Vec<VertexPair> {
    let robot = scan.pose.position;
    let endpoints = scan.endpoints();
    let mut pairs = Vec::new();
    for i in 0..endpoints.len().saturating_sub(1) {
        let (a, b) = (endpoints[i], endpoints[i + 1]);
        let separation = a.distance(b);
        if !(separation > params.gap_threshold) {
            continue;
        }
        let (v1, v2, corner_index) = if scan.ranges[i] <= scan.ranges[i + 1] {
            (a, b, i)
        } else {
            (b, a, i + 1)
        };
        if v1.distance(robot) > params.front_limit {
            continue;
        }
        if scan.pose.bearing_to(v1).abs() > std::f64::consts::FRAC_PI_2 {
            continue;
        }
        pairs.push(VertexPair {
            v1,
            v2,
            index1: i,
            index2: i + 1,
            corner_index,
            separation,
        });
    }
    pairs
}

pub fn select_corners(pairs: &[VertexPair]) -> Vec<WorldPoint> {
    pairs.iter().map(|p| p.v1).collect()
}

/// Strict outside test against the contour: `|r| > rho(beta)`. Points outside a
/// partial field of view are never seen and count as outside.
pub fn is_outside_contour(scan: &LaserScan, h: WorldPoint) -> bool {
    let r = h - scan.pose.position;
    let beta = scan.pose.bearing_to(h);
    match scan.range_at_angle(beta) {
        Ok(rho) => r.norm() > rho,
        Err(_) => true,
    }
}

/// Offset on the hidden side of the pair's gap edge.
fn hidden_side_offset(pair: &VertexPair, p: WorldPoint, d: f64) -> WorldPoint {
    let r = if pair.corner_first() {
        offset_right(pair.v1, pair.v2, p, d)
    } else {
        offset_left(pair.v1, pair.v2, p, d)
    };
    // separation > gap_threshold > 0 and d > 0, so the segment is never degenerate
    r.expect("gap pair with zero separation")
}

fn lateral_probes_clear(grid: &OccupancyGrid, pair: &VertexPair, h: WorldPoint, params: &DetectionParams) -> bool {
    let k = params.k.max(1);
    (1..=k).all(|i| {
        let d = i as f64 / k as f64 * params.offset();
        let pr = offset_right(pair.v1, pair.v2, h, d).expect("non-degenerate pair");
        let pl = offset_left(pair.v1, pair.v2, h, d).expect("non-degenerate pair");
        !grid.is_occupied(pr) && !grid.is_occupied(pl)
    })
}

/// Walks one gap edge from its corner; returns the first acceptable emergence point.
pub fn search_pair(
    grid: &OccupancyGrid,
    scan: &LaserScan,
    pair: &VertexPair,
    params: &DetectionParams,
) -> Option<InvisibleHuman> {
    let robot = scan.pose.position;
    let u = (pair.v2 - pair.v1) * (1.0 / pair.separation);
    let step = params.step();
    if !(step > 0.0) {
        return None;
    }
    let mut n = 0u64;
    loop {
        let s = n as f64 * step;
        if s > pair.separation {
            return None;
        }
        n += 1;
        let p = pair.v1 + u * s;
        let h = hidden_side_offset(pair, p, params.offset());
        if !is_outside_contour(scan, h) {
            continue;
        }
        if grid.is_occupied(h) || grid.circle_overlaps(h, params.h_rad) {
            continue;
        }
        if !lateral_probes_clear(grid, pair, h, params) {
            continue;
        }
        let to_robot = robot - h;
        return Some(InvisibleHuman {
            position: h,
            direction: to_robot.angle(),
            source_corner: pair.v1,
            corner_index: pair.corner_index,
            gap_index: pair.index1,
            distance_to_robot: to_robot.norm(),
        });
    }
}

/// Greedy merge: keep detections nearest to the robot, drop any within `h_rad` of a
/// kept one, then restore corner order.
fn merge_close(mut found: Vec<InvisibleHuman>, h_rad: f64) -> Vec<InvisibleHuman> {
    found.sort_by(|a, b| {
        a.distance_to_robot
            .total_cmp(&b.distance_to_robot)
            .then(a.corner_index.cmp(&b.corner_index))
    });
    let mut kept: Vec<InvisibleHuman> = Vec::with_capacity(found.len());
    for h in found {
        if kept.iter().all(|k| k.position.distance(h.position) >= h_rad) {
            kept.push(h);
        }
    }
    kept.sort_by_key(|h| h.corner_index);
    kept
}

/// Runs the gap search for every front corner of `scan`.
pub fn locate_invisible_humans(
    grid: &OccupancyGrid,
    scan: &LaserScan,
    params: &DetectionParams,
) -> Vec<InvisibleHuman> {
    let pairs = find_gap_pairs(scan, params);
    locate_from_pairs(grid, scan, &pairs, params)
}

pub fn locate_from_pairs(
    grid: &OccupancyGrid,
    scan: &LaserScan,
    pairs: &[VertexPair],
    params: &DetectionParams,
) -> Vec<InvisibleHuman> {
    let found = pairs
        .iter()
        .filter_map(|p| search_pair(grid, scan, p, params))
        .collect();
    merge_close(found, params.h_rad)
}

/// Scan plus detections in one call, using the default scanner with the front limit
/// taken from `params`.
pub fn detect(
    grid: &OccupancyGrid,
    pose: Pose2D,
    params: &DetectionParams,
) -> Result<(LaserScan, Vec<InvisibleHuman>), ScanError> {
    let config = ScanConfig {
        front_limit: params.front_limit.min(ScanConfig::default().max_range),
        ..ScanConfig::default()
    };
    detect_with_config(grid, pose, &config, params)
}

pub fn detect_with_config(
    grid: &OccupancyGrid,
    pose: Pose2D,
    config: &ScanConfig,
    params: &DetectionParams,
) -> Result<(LaserScan, Vec<InvisibleHuman>), ScanError> {
    let scan = simulate_scan(grid, pose, config)?;
    let humans = locate_invisible_humans(grid, &scan, params);
    Ok((scan, humans))
}
