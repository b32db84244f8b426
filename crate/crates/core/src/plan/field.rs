//! Euclidean distance to the nearest occupied cell, with bilinear lookup.

use crate::gridmap::{OccupancyGrid, WorldPoint};

/// Distance from each cell center to the nearest occupied cell center, minus half a
/// cell, so values approximate the distance to the obstacle surface. The map border
/// counts as an obstacle.
#[derive(Debug, Clone)]
pub struct DistanceField {
    width: usize,
    height: usize,
    resolution: f64,
    origin: WorldPoint,
    dist: Vec<f64>,
}

const INF: f64 = 1e20;

/// 1D squared distance transform of a sampled function (lower envelope of parabolas).
fn edt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0f64; n + 1];
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let mut s;
        loop {
            let p = v[k];
            s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * q as f64 - 2.0 * p as f64);
            if s <= z[k] {
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

impl DistanceField {
    pub fn new(grid: &OccupancyGrid) -> Self {
        // pad by one occupied cell so the border acts as a wall
        let w = grid.width() + 2;
        let h = grid.height() + 2;
        let mut f = vec![INF; w * h];
        for row in 0..h {
            for col in 0..w {
                if grid.cell_occupied(col as i64 - 1, row as i64 - 1) {
                    f[row * w + col] = 0.0;
                }
            }
        }
        let mut tmp = vec![0.0; w.max(h)];
        let mut col_buf = vec![0.0; h];
        for col in 0..w {
            for row in 0..h {
                col_buf[row] = f[row * w + col];
            }
            edt_1d(&col_buf, &mut tmp[..h]);
            for row in 0..h {
                f[row * w + col] = tmp[row];
            }
        }
        let mut row_buf = vec![0.0; w];
        for row in 0..h {
            row_buf.copy_from_slice(&f[row * w..(row + 1) * w]);
            edt_1d(&row_buf, &mut tmp[..w]);
            f[row * w..(row + 1) * w].copy_from_slice(&tmp[..w]);
        }
        let res = grid.resolution();
        let dist = f
            .iter()
            .map(|d2| (d2.sqrt() * res - 0.5 * res).max(0.0))
            .collect();
        Self {
            width: w,
            height: h,
            resolution: res,
            origin: WorldPoint::new(grid.origin().x - res, grid.origin().y - res),
            dist,
        }
    }

    fn at(&self, col: i64, row: i64) -> f64 {
        let c = col.clamp(0, self.width as i64 - 1) as usize;
        let r = row.clamp(0, self.height as i64 - 1) as usize;
        self.dist[r * self.width + c]
    }

    /// Bilinearly interpolated clearance at `p` (m).
    pub fn distance(&self, p: WorldPoint) -> f64 {
        let gx = (p.x - self.origin.x) / self.resolution - 0.5;
        let gy = (p.y - self.origin.y) / self.resolution - 0.5;
        if !gx.is_finite() || !gy.is_finite() {
            return 0.0;
        }
        let c0 = gx.floor();
        let r0 = gy.floor();
        let fx = gx - c0;
        let fy = gy - r0;
        let (c0, r0) = (c0 as i64, r0 as i64);
        let d00 = self.at(c0, r0);
        let d10 = self.at(c0 + 1, r0);
        let d01 = self.at(c0, r0 + 1);
        let d11 = self.at(c0 + 1, r0 + 1);
        let top = d00 * (1.0 - fx) + d10 * fx;
        let bottom = d01 * (1.0 - fx) + d11 * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Clearance of the cell containing `p`, without interpolation.
    pub fn cell_distance(&self, col: i64, row: i64) -> f64 {
        self.at(col + 1, row + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_brute_force() {
        let mut g = OccupancyGrid::empty(23, 17, 0.1, WorldPoint::new(-1.0, 0.5)).unwrap();
        for (c, r) in [(3, 4), (10, 10), (11, 10), (20, 2), (5, 15)] {
            g.set_occupied(c, r, true);
        }
        let field = DistanceField::new(&g);
        for row in -1..18i64 {
            for col in -1..24i64 {
                let mut best = f64::INFINITY;
                for r in -1..18i64 {
                    for c in -1..24i64 {
                        if g.cell_occupied(c, r) {
                            let d = (((c - col).pow(2) + (r - row).pow(2)) as f64).sqrt();
                            best = best.min(d);
                        }
                    }
                }
                let expected = (best * 0.1 - 0.05).max(0.0);
                assert!(
                    (field.cell_distance(col, row) - expected).abs() < 1e-9,
                    "cell ({col},{row})"
                );
            }
        }
    }

    #[test]
    fn interpolates_between_centers() {
        let g = OccupancyGrid::empty(40, 40, 0.1, WorldPoint::default()).unwrap();
        let field = DistanceField::new(&g);
        let d = field.distance(WorldPoint::new(2.0, 1.0));
        assert!((d - 1.0).abs() < 0.06, "{d}");
    }
}
