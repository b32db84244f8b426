//! Local waypoint optimizer and the per-cycle navigation loop.
//!
//! Each cycle detects invisible humans, classifies passages, then runs a fixed number of
//! projected gradient-descent iterations over the positions of a fixed-horizon,
//! uniformly timed trajectory. The first segment of the result is the velocity command.

mod field;
mod search;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use field::DistanceField;
pub use search::{astar, point_at, polyline_length, segment_clear, shortcut};

use crate::cost::{pose_cost, InvisibleCostParams, TimedPoses};
use crate::detect::{detect_with_config, DetectionParams, InvisibleHuman};
use crate::gridmap::{OccupancyGrid, WorldPoint};
use crate::passage::{
    classify_passage, passage_directive, PassageClass, PassageKind, PassageLimits, PlanDirective, PlanMode,
};
use crate::scan::{Pose2D, ScanConfig, ScanError};

#[derive(Error, Debug, PartialEq)]
pub enum PlanError {
    #[error("{what} position {at} is not in free space")]
    NotFree { what: &'static str, at: WorldPoint },
    #[error("no collision-free seed from {from} to {to}")]
    NoSeed { from: WorldPoint, to: WorldPoint },
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error("invalid plan config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanWeights {
    /// Tracking of the reference points laid along the seed path.
    pub goal: f64,
    pub obstacle: f64,
    pub smoothness: f64,
    pub invisible: f64,
    pub visible: f64,
}

impl Default for PlanWeights {
    fn default() -> Self {
        Self {
            goal: 1.0,
            obstacle: 0.002,
            smoothness: 2.0,
            invisible: 2.0,
            visible: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanConfig {
    pub vmax: f64,
    pub vmax_passthrough: f64,
    pub waypoint_count: usize,
    /// Trajectory duration (s).
    pub horizon: f64,
    pub weights: PlanWeights,
    /// Desired clearance between the robot body and obstacles (m).
    pub obstacle_clearance: f64,
    /// Desired clearance between the robot body and visible humans (m).
    pub visible_clearance: f64,
    pub robot_radius: f64,
    pub human_radius: f64,
    pub iterations: usize,
    /// Initial max per-waypoint displacement of a descent step (m).
    pub step_size: f64,
    /// Control period (s).
    pub cycle_dt: f64,
    pub goal_tolerance: f64,
    pub invisible_cost: bool,
    pub passage_mode: bool,
    pub cost: InvisibleCostParams,
    pub detection: DetectionParams,
    pub limits: PassageLimits,
}

impl Default for PlanConfig {
    fn default() -> Self {
        Self {
            vmax: 0.7,
            vmax_passthrough: crate::passage::PASS_THROUGH_VMAX,
            waypoint_count: 30,
            horizon: 5.0,
            weights: PlanWeights::default(),
            obstacle_clearance: 0.05,
            visible_clearance: 0.6,
            robot_radius: 0.5,
            human_radius: 0.3,
            iterations: 40,
            step_size: 0.05,
            cycle_dt: 0.1,
            goal_tolerance: 0.1,
            invisible_cost: true,
            passage_mode: true,
            cost: InvisibleCostParams::default(),
            detection: DetectionParams::default(),
            limits: PassageLimits::default(),
        }
    }
}

impl PlanConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |m: &str| Err(PlanError::InvalidConfig(m.to_string()));
        if !(self.vmax > 0.0 && self.vmax_passthrough > 0.0) {
            return bad("speeds must be positive");
        }
        if self.vmax_passthrough > self.vmax {
            return bad("vmax_passthrough must not exceed vmax");
        }
        if self.waypoint_count < 3 {
            return bad("waypoint_count must be >= 3");
        }
        if !(self.horizon > 0.0 && self.cycle_dt > 0.0 && self.step_size > 0.0) {
            return bad("horizon, cycle_dt and step_size must be positive");
        }
        let w = &self.weights;
        if [w.goal, w.obstacle, w.smoothness, w.invisible, w.visible]
            .iter()
            .any(|v| !(*v >= 0.0))
        {
            return bad("weights must be non-negative");
        }
        self.cost
            .validate()
            .map_err(|e| PlanError::InvalidConfig(e.to_string()))
    }

    /// Time between consecutive waypoints.
    pub fn waypoint_dt(&self) -> f64 {
        self.horizon / (self.waypoint_count - 1) as f64
    }
}

/// A tracked human in the robot's field of view, with constant-velocity prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibleHuman {
    pub position: WorldPoint,
    pub velocity: WorldPoint,
}

impl VisibleHuman {
    pub fn predict(&self, t: f64) -> WorldPoint {
        self.position + self.velocity * t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedTrajectory {
    pub waypoints: Vec<(Pose2D, f64)>,
}

impl TimedTrajectory {
    fn from_positions(points: &[WorldPoint], times: &[f64], start_heading: f64) -> Self {
        let mut heading = start_heading;
        let waypoints = points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if let Some(next) = points.get(i + 1) {
                    let d = *next - *p;
                    if d.norm() > 1e-9 {
                        heading = d.angle();
                    }
                }
                (Pose2D::new(p.x, p.y, heading), times[i])
            })
            .collect();
        Self { waypoints }
    }

    pub fn positions(&self) -> Vec<WorldPoint> {
        self.waypoints.iter().map(|(p, _)| p.position).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.waypoints.iter().map(|(_, t)| *t).collect()
    }

    /// Speed of each segment.
    pub fn speeds(&self) -> Vec<f64> {
        self.waypoints
            .windows(2)
            .map(|w| w[0].0.position.distance(w[1].0.position) / (w[1].1 - w[0].1))
            .collect()
    }

    /// Velocity of the first segment.
    pub fn first_velocity(&self) -> WorldPoint {
        match self.waypoints.as_slice() {
            [a, b, ..] => (b.0.position - a.0.position) * (1.0 / (b.1 - a.1)),
            _ => WorldPoint::default(),
        }
    }

    /// Linear interpolation of position at time `t`, clamped to the ends.
    pub fn position_at(&self, t: f64) -> WorldPoint {
        let w = &self.waypoints;
        if t <= w[0].1 {
            return w[0].0.position;
        }
        for pair in w.windows(2) {
            let (a, ta) = (pair[0].0.position, pair[0].1);
            let (b, tb) = (pair[1].0.position, pair[1].1);
            if t <= tb {
                return a + (b - a) * ((t - ta) / (tb - ta));
            }
        }
        w[w.len() - 1].0.position
    }
}

impl TimedPoses for TimedTrajectory {
    fn timed_poses(&self) -> Vec<(WorldPoint, f64)> {
        self.waypoints.iter().map(|(p, t)| (p.position, *t)).collect()
    }
}

/// Everything the objective needs for one cycle.
pub struct CycleProblem<'a> {
    pub refs: Vec<WorldPoint>,
    pub times: Vec<f64>,
    pub humans_inv: &'a [InvisibleHuman],
    pub humans_vis: &'a [VisibleHuman],
    pub speed_cap: f64,
}

fn inverse_clearance(c: f64, radius: f64) -> f64 {
    if c >= radius {
        0.0
    } else {
        let inv = 1.0 / c.max(0.02) - 1.0 / radius;
        inv * inv
    }
}

/// Grid, precomputed distance field and configuration; reusable across cycles.
#[derive(Debug, Clone)]
pub struct Planner {
    grid: OccupancyGrid,
    field: DistanceField,
    config: PlanConfig,
}

impl Planner {
    pub fn new(grid: OccupancyGrid, config: PlanConfig) -> Result<Self, PlanError> {
        config.validate()?;
        let field = DistanceField::new(&grid);
        Ok(Self { grid, field, config })
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn field(&self) -> &DistanceField {
        &self.field
    }

    pub fn config(&self) -> &PlanConfig {
        &self.config
    }

    fn check_step(&self) -> f64 {
        self.grid.resolution() * 0.5
    }

    /// Polyline from `from` to `to`: the straight segment when it keeps the robot
    /// clear, otherwise a shortcut A* path.
    pub fn seed_path(&self, from: WorldPoint, to: WorldPoint) -> Result<Vec<WorldPoint>, PlanError> {
        let r = self.config.robot_radius;
        if segment_clear(&self.field, from, to, r, self.check_step()) {
            return Ok(vec![from, to]);
        }
        for clearance in [r, 0.75 * r] {
            if let Some(path) = astar(&self.grid, &self.field, from, to, clearance) {
                return Ok(shortcut(&self.field, &path, clearance, self.check_step()));
            }
        }
        Err(PlanError::NoSeed { from, to })
    }

    /// Cost terms that depend on a single waypoint.
    fn point_cost(&self, n: usize, p: WorldPoint, prob: &CycleProblem) -> f64 {
        let w = &self.config.weights;
        let t = prob.times[n];
        let mut c = w.goal * {
            let d = p - prob.refs[n];
            d.dot(d)
        };
        if w.obstacle > 0.0 {
            let clearance = self.field.distance(p) - self.config.robot_radius;
            c += w.obstacle * inverse_clearance(clearance, self.config.obstacle_clearance);
        }
        if w.invisible > 0.0 && !prob.humans_inv.is_empty() {
            c += w.invisible * pose_cost(p, t, prob.humans_inv, &self.config.cost);
        }
        if w.visible > 0.0 {
            for h in prob.humans_vis {
                let clearance =
                    p.distance(h.predict(t)) - self.config.robot_radius - self.config.human_radius;
                c += w.visible * inverse_clearance(clearance, self.config.visible_clearance);
            }
        }
        c
    }

    fn smoothness(&self, x: &[WorldPoint]) -> f64 {
        self.config.weights.smoothness
            * x.windows(3)
                .map(|w| {
                    let a = w[2] - w[1] * 2.0 + w[0];
                    a.dot(a)
                })
                .sum::<f64>()
    }

    /// Full objective of a candidate (positions including the fixed start).
    pub fn objective(&self, x: &[WorldPoint], prob: &CycleProblem) -> f64 {
        let points: f64 = x
            .iter()
            .enumerate()
            .skip(1)
            .map(|(n, p)| self.point_cost(n, *p, prob))
            .sum();
        points + self.smoothness(x)
    }

    fn gradient(&self, x: &[WorldPoint], prob: &CycleProblem) -> Vec<WorldPoint> {
        const H: f64 = 1e-6;
        let ws = self.config.weights.smoothness;
        let n = x.len();
        let mut g = vec![WorldPoint::default(); n];
        for i in 1..n {
            let p = x[i];
            let fx = |d: WorldPoint| self.point_cost(i, p + d, prob);
            let gx = (fx(WorldPoint::new(H, 0.0)) - fx(WorldPoint::new(-H, 0.0))) / (2.0 * H);
            let gy = (fx(WorldPoint::new(0.0, H)) - fx(WorldPoint::new(0.0, -H))) / (2.0 * H);
            g[i] = WorldPoint::new(gx, gy);
        }
        // d/dx of sum |x[k+1] - 2x[k] + x[k-1]|^2
        for k in 1..n.saturating_sub(1) {
            let a = (x[k + 1] - x[k] * 2.0 + x[k - 1]) * (2.0 * ws);
            g[k - 1] = g[k - 1] + a;
            g[k] = g[k] - a * 2.0;
            g[k + 1] = g[k + 1] + a;
        }
        g[0] = WorldPoint::default();
        g
    }

    /// Clamps every segment to the speed cap, walking forward from the fixed start.
    fn project(&self, x: &mut [WorldPoint], speed_cap: f64) {
        let max_len = speed_cap * self.config.waypoint_dt();
        for i in 1..x.len() {
            let d = x[i] - x[i - 1];
            let len = d.norm();
            if len > max_len {
                x[i] = x[i - 1] + d * (max_len / len);
            }
        }
    }

    /// Builds the cycle problem for `pose`: reference points along the seed path at the
    /// capped speed.
    pub fn problem<'a>(
        &self,
        pose: Pose2D,
        goal: WorldPoint,
        humans_inv: &'a [InvisibleHuman],
        humans_vis: &'a [VisibleHuman],
        directive: &PlanDirective,
    ) -> Result<CycleProblem<'a>, PlanError> {
        if self.grid.is_occupied(pose.position) {
            return Err(PlanError::NotFree {
                what: "robot",
                at: pose.position,
            });
        }
        if self.grid.is_occupied(goal) {
            return Err(PlanError::NotFree { what: "goal", at: goal });
        }
        let path = self.seed_path(pose.position, goal)?;
        let speed_cap = directive
            .vmax_cap
            .map_or(self.config.vmax, |c| c.min(self.config.vmax));
        let dt = self.config.waypoint_dt();
        let times: Vec<f64> = (0..self.config.waypoint_count).map(|i| i as f64 * dt).collect();
        let refs = times.iter().map(|t| point_at(&path, speed_cap * t)).collect();
        let humans_inv = if directive.disable_invisible_cost {
            &[][..]
        } else {
            humans_inv
        };
        Ok(CycleProblem {
            refs,
            times,
            humans_inv,
            humans_vis,
            speed_cap,
        })
    }

    /// Initial positions: the previous trajectory advanced by `elapsed`, or the reference
    /// points when there is none. Always feasible for the speed cap.
    pub fn initial_positions(
        &self,
        pose: Pose2D,
        prob: &CycleProblem,
        prev: Option<&TimedTrajectory>,
        elapsed: f64,
    ) -> Vec<WorldPoint> {
        let mut x: Vec<WorldPoint> = match prev {
            Some(prev) if prev.waypoints.len() >= 2 => prob
                .times
                .iter()
                .map(|t| prev.position_at(t + elapsed))
                .collect(),
            _ => prob.refs.clone(),
        };
        x[0] = pose.position;
        self.project(&mut x, prob.speed_cap);
        x
    }

    /// Projected descent from `x0`; never returns a worse objective than `x0`'s.
    pub fn descend(&self, mut x: Vec<WorldPoint>, prob: &CycleProblem) -> Vec<WorldPoint> {
        let mut f = self.objective(&x, prob);
        let mut step = self.config.step_size;
        for _ in 0..self.config.iterations {
            let g = self.gradient(&x, prob);
            let gmax = g.iter().map(|v| v.norm()).fold(0.0, f64::max);
            if !(gmax > 1e-12) {
                break;
            }
            let mut accepted = false;
            for _ in 0..12 {
                let scale = step / gmax;
                let mut cand: Vec<WorldPoint> = x.iter().zip(&g).map(|(p, d)| *p - *d * scale).collect();
                self.project(&mut cand, prob.speed_cap);
                let fc = self.objective(&cand, prob);
                if fc < f {
                    x = cand;
                    f = fc;
                    step = (step * 1.5).min(0.3);
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        x
    }

    /// One optimization cycle.
    #[allow(clippy::too_many_arguments)]
    pub fn optimize_cycle(
        &self,
        pose: Pose2D,
        goal: WorldPoint,
        humans_inv: &[InvisibleHuman],
        humans_vis: &[VisibleHuman],
        directive: &PlanDirective,
        prev: Option<&TimedTrajectory>,
        elapsed: f64,
    ) -> Result<TimedTrajectory, PlanError> {
        let prob = self.problem(pose, goal, humans_inv, humans_vis, directive)?;
        let x0 = self.initial_positions(pose, &prob, prev, elapsed);
        let x = self.descend(x0, &prob);
        Ok(TimedTrajectory::from_positions(&x, &prob.times, pose.heading))
    }
}

/// Free-standing form of [`Planner::optimize_cycle`] that builds the planner on the fly.
#[allow(clippy::too_many_arguments)]
pub fn optimize_cycle(
    grid: &OccupancyGrid,
    pose: Pose2D,
    goal: WorldPoint,
    humans_inv: &[InvisibleHuman],
    humans_vis: &[VisibleHuman],
    directive: &PlanDirective,
    config: &PlanConfig,
    prev_traj: Option<&TimedTrajectory>,
) -> Result<TimedTrajectory, PlanError> {
    let planner = Planner::new(grid.clone(), *config)?;
    planner.optimize_cycle(pose, goal, humans_inv, humans_vis, directive, prev_traj, config.cycle_dt)
}

/// Pass-through mode stays on until the robot crosses the passage line.
#[derive(Debug, Clone, PartialEq)]
pub struct PassageLatch {
    pub class: PassageClass,
    line_point: WorldPoint,
    line_dir: WorldPoint,
    side: f64,
}

impl PassageLatch {
    pub fn new(class: PassageClass, robot: Pose2D) -> Option<Self> {
        let (line_point, line_dir) = match class.vertices.as_slice() {
            [a, b] => (*a, *b - *a),
            [h] => (*h, WorldPoint::from_polar(1.0, robot.heading + std::f64::consts::FRAC_PI_2)),
            _ => return None,
        };
        let side = line_dir.cross(robot.position - line_point);
        Some(Self {
            class,
            line_point,
            line_dir,
            side,
        })
    }

    /// True once the robot is on the other side of the passage line.
    pub fn crossed(&self, robot: WorldPoint) -> bool {
        let s = self.line_dir.cross(robot - self.line_point);
        s * self.side <= 0.0
    }
}

#[derive(Debug, Clone, Default)]
pub struct NavState {
    pub pose: Option<Pose2D>,
    pub time: f64,
    pub prev: Option<TimedTrajectory>,
    pub latch: Option<PassageLatch>,
}

impl NavState {
    pub fn new(pose: Pose2D) -> Self {
        Self {
            pose: Some(pose),
            ..Self::default()
        }
    }

    pub fn pose(&self) -> Pose2D {
        self.pose.expect("nav state without pose")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct World<'a> {
    pub goal: WorldPoint,
    pub visible: &'a [VisibleHuman],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleDiagnostics {
    pub time: f64,
    pub pose: Pose2D,
    pub command: WorldPoint,
    pub mode: PlanMode,
    pub detections: Vec<InvisibleHuman>,
    pub passage: PassageClass,
    pub min_dist_inv: Option<f64>,
    pub min_dist_vis: Option<f64>,
    pub goal_reached: bool,
    pub trajectory: Option<TimedTrajectory>,
}

fn min_distance(robot: WorldPoint, points: impl Iterator<Item = WorldPoint>) -> Option<f64> {
    points.map(|p| robot.distance(p)).min_by(f64::total_cmp)
}

/// detect -> classify -> directive -> optimize; returns the velocity command.
pub fn control_cycle(
    state: &mut NavState,
    world: &World,
    planner: &Planner,
) -> Result<(WorldPoint, CycleDiagnostics), PlanError> {
    let cfg = planner.config();
    let pose = state.pose();
    let robot = pose.position;
    let scan_config = ScanConfig {
        front_limit: cfg.detection.front_limit.min(ScanConfig::default().max_range),
        ..ScanConfig::default()
    };
    let (scan, detections) = detect_with_config(planner.grid(), pose, &scan_config, &cfg.detection)?;
    let min_dist_inv = min_distance(robot, detections.iter().map(|h| h.position));
    let min_dist_vis = min_distance(robot, world.visible.iter().map(|h| h.position));

    if robot.distance(world.goal) < cfg.goal_tolerance {
        state.prev = None;
        let diag = CycleDiagnostics {
            time: state.time,
            pose,
            command: WorldPoint::default(),
            mode: PlanMode::Normal,
            detections,
            passage: PassageClass::none(),
            min_dist_inv,
            min_dist_vis,
            goal_reached: true,
            trajectory: None,
        };
        return Ok((WorldPoint::default(), diag));
    }

    let mut passage = PassageClass::none();
    let mut directive = PlanDirective::normal();
    if cfg.passage_mode {
        if let Some(latch) = &state.latch {
            if latch.crossed(robot) {
                state.latch = None;
            }
        }
        match &state.latch {
            Some(latch) => {
                passage = latch.class.clone();
                directive = passage_directive(&passage);
            }
            None => {
                passage = classify_passage(&detections, &scan, &cfg.limits);
                directive = passage_directive(&passage);
                if passage.kind != PassageKind::NoPassage {
                    state.latch = PassageLatch::new(passage.clone(), pose);
                }
            }
        }
    }
    if directive.mode == PlanMode::PassThrough {
        directive.vmax_cap = Some(cfg.vmax_passthrough.min(directive.vmax_cap.unwrap_or(f64::INFINITY)));
    }

    let humans_inv: &[InvisibleHuman] = if cfg.invisible_cost { &detections } else { &[] };
    let traj = planner.optimize_cycle(
        pose,
        world.goal,
        humans_inv,
        world.visible,
        &directive,
        state.prev.as_ref(),
        cfg.cycle_dt,
    )?;
    let command = traj.first_velocity();
    state.prev = Some(traj.clone());
    let diag = CycleDiagnostics {
        time: state.time,
        pose,
        command,
        mode: directive.mode,
        detections,
        passage,
        min_dist_inv,
        min_dist_vis,
        goal_reached: false,
        trajectory: Some(traj),
    };
    Ok((command, diag))
}
