//! Random-maze detection benchmark with automated labeling.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::detect::{detect, DetectionParams, InvisibleHuman};
use crate::gridmap::OccupancyGrid;
use crate::plan::DistanceField;
use crate::scan::Pose2D;

use super::maze::generate_maze;
use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LabelKind {
    TruePositive,
    FalsePositive,
    Overlap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionLabel {
    pub kind: LabelKind,
    pub detection: InvisibleHuman,
}

/// Grid-geometric stand-in for manual judgment: a center inside a wall is a false
/// positive, a disc clipping a wall is an overlap.
pub fn label_detections(grid: &OccupancyGrid, detections: &[InvisibleHuman], h_rad: f64) -> Vec<DetectionLabel> {
    detections
        .iter()
        .map(|d| {
            let kind = if grid.is_occupied(d.position) {
                LabelKind::FalsePositive
            } else if grid.circle_overlaps(d.position, h_rad) {
                LabelKind::Overlap
            } else {
                LabelKind::TruePositive
            };
            DetectionLabel { kind, detection: *d }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LabelCounts {
    pub true_positive: usize,
    pub false_positive: usize,
    pub overlap: usize,
}

impl LabelCounts {
    pub fn from_labels(labels: &[DetectionLabel]) -> Self {
        let mut c = Self::default();
        for l in labels {
            match l.kind {
                LabelKind::TruePositive => c.true_positive += 1,
                LabelKind::FalsePositive => c.false_positive += 1,
                LabelKind::Overlap => c.overlap += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.overlap
    }

    /// TP / (TP + FP + Overlap); 1 when there is nothing to judge.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 1.0,
            n => self.true_positive as f64 / n as f64,
        }
    }

    /// (TP + Overlap) / total; 1 when there is nothing to judge.
    pub fn accuracy_with_overlap(&self) -> f64 {
        match self.total() {
            0 => 1.0,
            n => (self.true_positive + self.overlap) as f64 / n as f64,
        }
    }

    fn add(&mut self, o: &LabelCounts) {
        self.true_positive += o.true_positive;
        self.false_positive += o.false_positive;
        self.overlap += o.overlap;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapResult {
    pub index: usize,
    /// Maze seed and corridor width; `None` for user-supplied maps.
    pub map_seed: Option<u64>,
    pub corridor_width: Option<f64>,
    pub pose: Pose2D,
    pub counts: LabelCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyReport {
    pub seed: u64,
    pub maps: Vec<MapResult>,
    pub total: LabelCounts,
}

/// Size of each benchmark maze in cells.
pub const BENCH_MAZE_CELLS: usize = 100;
/// Minimum clearance of the sampled robot position (m).
pub const BENCH_POSE_CLEARANCE: f64 = 0.3;

fn random_pose(grid: &OccupancyGrid, rng: &mut ChaCha8Rng) -> Option<Pose2D> {
    let field = DistanceField::new(grid);
    let free: Vec<(i64, i64)> = (0..grid.height() as i64)
        .flat_map(|r| (0..grid.width() as i64).map(move |c| (c, r)))
        .filter(|&(c, r)| !grid.cell_occupied(c, r) && field.cell_distance(c, r) >= BENCH_POSE_CLEARANCE)
        .collect();
    if free.is_empty() {
        return None;
    }
    let (c, r) = free[rng.gen_range(0..free.len())];
    let p = grid.cell_center(c, r);
    let heading = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    Some(Pose2D::new(p.x, p.y, heading))
}

/// Detects from one random free pose in each of `n_maps` seeded mazes and labels
/// every detection.
pub fn accuracy_experiment(n_maps: usize, seed: u64) -> Result<AccuracyReport, HarnessError> {
    accuracy_experiment_with(n_maps, seed, &DetectionParams::default())
}

pub fn accuracy_experiment_with(
    n_maps: usize,
    seed: u64,
    params: &DetectionParams,
) -> Result<AccuracyReport, HarnessError> {
    if n_maps == 0 {
        return Err(HarnessError::Invalid("n_maps must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = AccuracyReport {
        seed,
        maps: Vec::with_capacity(n_maps),
        total: LabelCounts::default(),
    };
    for index in 0..n_maps {
        let map_seed: u64 = rng.gen();
        let corridor_width = rng.gen_range(1.0..=2.0);
        let grid = generate_maze(map_seed, BENCH_MAZE_CELLS, BENCH_MAZE_CELLS, corridor_width)?;
        report.record(index, &grid, Some((map_seed, corridor_width)), &mut rng, params)?;
    }
    Ok(report)
}

/// Same experiment on user-supplied maps: run `i` uses `grids[i % grids.len()]`.
pub fn accuracy_on_maps(
    grids: &[OccupancyGrid],
    n_runs: usize,
    seed: u64,
    params: &DetectionParams,
) -> Result<AccuracyReport, HarnessError> {
    if n_runs == 0 || grids.is_empty() {
        return Err(HarnessError::Invalid("need at least one map and one run".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = AccuracyReport {
        seed,
        maps: Vec::with_capacity(n_runs),
        total: LabelCounts::default(),
    };
    for index in 0..n_runs {
        report.record(index, &grids[index % grids.len()], None, &mut rng, params)?;
    }
    Ok(report)
}

impl AccuracyReport {
    fn record(
        &mut self,
        index: usize,
        grid: &OccupancyGrid,
        maze: Option<(u64, f64)>,
        rng: &mut ChaCha8Rng,
        params: &DetectionParams,
    ) -> Result<(), HarnessError> {
        let pose = random_pose(grid, rng).ok_or_else(|| HarnessError::Invalid(format!("map {index} has no free pose")))?;
        let (_, humans) = detect(grid, pose, params)?;
        let counts = LabelCounts::from_labels(&label_detections(grid, &humans, params.h_rad));
        self.total.add(&counts);
        self.maps.push(MapResult {
            index,
            map_seed: maze.map(|m| m.0),
            corridor_width: maze.map(|m| m.1),
            pose,
            counts,
        });
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.maps.iter().all(|m| m.map_seed.is_some()) {
            out.push_str("# detection accuracy on seeded recursive-division mazes\n");
        } else {
            out.push_str("# detection accuracy on user maps\n");
        }
        out.push_str("# labels are automated: false_positive = center cell occupied, overlap = disc clips an occupied cell\n");
        out.push_str("# the detector rejects both cases itself, so false_positive and overlap are 0 by construction\n");
        let _ = writeln!(out, "# seed: {}", self.seed);
        out.push_str("map,map_seed,corridor_width,x,y,theta,detections,true_positive,false_positive,overlap,accuracy,accuracy_with_overlap\n");
        for m in &self.maps {
            let c = &m.counts;
            let _ = writeln!(
                out,
                "{},{},{},{:.4},{:.4},{:.4},{},{},{},{},{:.6},{:.6}",
                m.index,
                m.map_seed.map_or(String::new(), |s| s.to_string()),
                m.corridor_width.map_or(String::new(), |w| format!("{w:.4}")),
                m.pose.position.x,
                m.pose.position.y,
                m.pose.heading,
                c.total(),
                c.true_positive,
                c.false_positive,
                c.overlap,
                c.accuracy(),
                c.accuracy_with_overlap()
            );
        }
        let t = &self.total;
        let _ = writeln!(
            out,
            "total,,,,,,{},{},{},{},{:.6},{:.6}",
            t.total(),
            t.true_positive,
            t.false_positive,
            t.overlap,
            t.accuracy(),
            t.accuracy_with_overlap()
        );
        out
    }
}
