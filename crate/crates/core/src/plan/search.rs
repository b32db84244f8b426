//! Grid A* and polyline helpers used to seed the local optimizer.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::gridmap::{OccupancyGrid, WorldPoint};

use super::field::DistanceField;

#[derive(Clone, Copy, PartialEq)]
struct Node {
    f: f64,
    idx: usize,
}

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// True when every sample along `a -> b` keeps at least `clearance` from obstacles.
pub fn segment_clear(field: &DistanceField, a: WorldPoint, b: WorldPoint, clearance: f64, step: f64) -> bool {
    let len = a.distance(b);
    let n = (len / step).ceil().max(1.0) as usize;
    (0..=n).all(|i| {
        let t = i as f64 / n as f64;
        field.distance(a + (b - a) * t) >= clearance
    })
}

/// 8-connected A* over cells whose clearance is at least `clearance`. The start cell
/// is always allowed so a robot squeezed against a wall can still leave. Returns
/// world points from `start` to `goal`.
pub fn astar(
    grid: &OccupancyGrid,
    field: &DistanceField,
    start: WorldPoint,
    goal: WorldPoint,
    clearance: f64,
) -> Option<Vec<WorldPoint>> {
    let w = grid.width() as i64;
    let h = grid.height() as i64;
    let (sc, sr) = grid.world_to_cell(start);
    let (gc, gr) = grid.world_to_cell(goal);
    if !grid.in_bounds(sc, sr) || !grid.in_bounds(gc, gr) {
        return None;
    }
    let passable = |c: i64, r: i64| -> bool {
        grid.in_bounds(c, r) && !grid.cell_occupied(c, r) && field.cell_distance(c, r) >= clearance
    };
    if !passable(gc, gr) {
        return None;
    }
    let index = |c: i64, r: i64| (r * w + c) as usize;
    let n = (w * h) as usize;
    let mut g_cost = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let heuristic = |c: i64, r: i64| (((c - gc).pow(2) + (r - gr).pow(2)) as f64).sqrt();
    let start_idx = index(sc, sr);
    let goal_idx = index(gc, gr);
    g_cost[start_idx] = 0.0;
    let mut open = BinaryHeap::new();
    open.push(Node {
        f: heuristic(sc, sr),
        idx: start_idx,
    });
    const NEIGHBORS: [(i64, i64, f64); 8] = [
        (1, 0, 1.0),
        (-1, 0, 1.0),
        (0, 1, 1.0),
        (0, -1, 1.0),
        (1, 1, std::f64::consts::SQRT_2),
        (1, -1, std::f64::consts::SQRT_2),
        (-1, 1, std::f64::consts::SQRT_2),
        (-1, -1, std::f64::consts::SQRT_2),
    ];
    while let Some(Node { idx, .. }) = open.pop() {
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        if idx == goal_idx {
            break;
        }
        let c = idx as i64 % w;
        let r = idx as i64 / w;
        for (dc, dr, cost) in NEIGHBORS {
            let (nc, nr) = (c + dc, r + dr);
            if !passable(nc, nr) {
                continue;
            }
            // no corner cutting
            if dc != 0 && dr != 0 && (!passable(c + dc, r) || !passable(c, r + dr)) {
                continue;
            }
            let ni = index(nc, nr);
            let tentative = g_cost[idx] + cost;
            if tentative < g_cost[ni] {
                g_cost[ni] = tentative;
                parent[ni] = idx;
                open.push(Node {
                    f: tentative + heuristic(nc, nr),
                    idx: ni,
                });
            }
        }
    }
    if !closed[goal_idx] {
        return None;
    }
    let mut cells = vec![goal_idx];
    let mut cur = goal_idx;
    while cur != start_idx {
        cur = parent[cur];
        cells.push(cur);
    }
    cells.reverse();
    let mut path: Vec<WorldPoint> = cells
        .iter()
        .map(|&i| grid.cell_center(i as i64 % w, i as i64 / w))
        .collect();
    path[0] = start;
    *path.last_mut().expect("non-empty path") = goal;
    Some(path)
}

/// Drops intermediate vertices whenever the shortcut stays clear.
pub fn shortcut(field: &DistanceField, path: &[WorldPoint], clearance: f64, step: f64) -> Vec<WorldPoint> {
    if path.len() <= 2 {
        return path.to_vec();
    }
    let mut out = vec![path[0]];
    let mut i = 0;
    while i < path.len() - 1 {
        let mut j = path.len() - 1;
        while j > i + 1 && !segment_clear(field, path[i], path[j], clearance, step) {
            j -= 1;
        }
        out.push(path[j]);
        i = j;
    }
    out
}

pub fn polyline_length(path: &[WorldPoint]) -> f64 {
    path.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// Point at arc length `s` along `path`, clamped to its ends.
pub fn point_at(path: &[WorldPoint], s: f64) -> WorldPoint {
    let mut remaining = s.max(0.0);
    for w in path.windows(2) {
        let len = w[0].distance(w[1]);
        if remaining <= len && len > 0.0 {
            return w[0] + (w[1] - w[0]) * (remaining / len);
        }
        remaining -= len;
    }
    *path.last().expect("empty path")
}
