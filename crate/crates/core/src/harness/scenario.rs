//! Scenario files, built-in maps and the closed-loop simulator.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detect::detect;
use crate::gridmap::{load_map, OccupancyGrid, WorldPoint};
use crate::passage::{PassageKind, PlanMode};
use crate::plan::{control_cycle, point_at, NavState, PlanConfig, Planner, VisibleHuman, World};
use crate::scan::{Pose2D, ScanConfig};

use super::HarnessError;

/// Scripted human: piecewise-linear `[x, y, t]` keyframes with increasing times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanScript {
    pub script: Vec<[f64; 3]>,
}

impl HumanScript {
    /// Position at time `t`, holding the first and last keyframes outside the script.
    pub fn position_at(&self, t: f64) -> WorldPoint {
        let s = &self.script;
        let first = s[0];
        if t <= first[2] {
            return WorldPoint::new(first[0], first[1]);
        }
        for w in s.windows(2) {
            let (a, b) = (w[0], w[1]);
            if t <= b[2] {
                let u = (t - a[2]) / (b[2] - a[2]);
                return WorldPoint::new(a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1]));
            }
        }
        let last = s[s.len() - 1];
        WorldPoint::new(last[0], last[1])
    }

    /// Script velocity at time `t` (zero outside the script).
    pub fn velocity_at(&self, t: f64) -> WorldPoint {
        for w in self.script.windows(2) {
            let (a, b) = (w[0], w[1]);
            if t >= a[2] && t < b[2] {
                let dt = b[2] - a[2];
                return WorldPoint::new((b[0] - a[0]) / dt, (b[1] - a[1]) / dt);
            }
        }
        WorldPoint::default()
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if self.script.is_empty() {
            return Err(HarnessError::Invalid("human script is empty".into()));
        }
        if self.script.iter().flatten().any(|v| !v.is_finite()) {
            return Err(HarnessError::Invalid("human script has non-finite values".into()));
        }
        if self.script.windows(2).any(|w| w[1][2] <= w[0][2]) {
            return Err(HarnessError::Invalid(
                "human script times must strictly increase".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Features {
    pub invisible_cost: bool,
    pub passage_mode: bool,
}

impl Default for Features {
    fn default() -> Self {
        Self {
            invisible_cost: true,
            passage_mode: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    #[default]
    Optimizer,
    /// Shortest path at full speed, ignoring humans.
    Naive,
}

/// Seeded perturbations applied per run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Jitter {
    /// Uniform start-position offset per axis (m).
    pub start: f64,
    /// Uniform shift of every human script (s).
    pub timing: f64,
}

impl Default for Jitter {
    fn default() -> Self {
        Self {
            start: 0.1,
            timing: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Map file path (relative to the scenario file) or `builtin:<name>`.
    pub map: String,
    /// `[x, y]` or `[x, y, theta]`.
    pub start: Vec<f64>,
    pub goal: Vec<f64>,
    #[serde(default)]
    pub humans: Vec<HumanScript>,
    #[serde(default)]
    pub features: Features,
    #[serde(default)]
    pub seed: u64,
    pub duration_s: f64,
    #[serde(default)]
    pub planner: PlannerKind,
    #[serde(default)]
    pub jitter: Jitter,
    /// Planner overrides; `features` takes precedence for the two feature switches.
    #[serde(default)]
    pub config: PlanConfig,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn point_of(v: &[f64], what: &str) -> Result<WorldPoint, HarnessError> {
    match v {
        [x, y] | [x, y, _] if x.is_finite() && y.is_finite() => Ok(WorldPoint::new(*x, *y)),
        _ => Err(HarnessError::Invalid(format!(
            "{what} must be [x, y] or [x, y, theta] with finite values"
        ))),
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut s = Self::from_json(&text)?;
        s.base_dir = path.parent().map(Path::to_path_buf);
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn start_pose(&self) -> Result<Pose2D, HarnessError> {
        let p = point_of(&self.start, "start")?;
        let heading = self.start.get(2).copied().unwrap_or(0.0);
        Ok(Pose2D::new(p.x, p.y, heading))
    }

    pub fn goal_point(&self) -> Result<WorldPoint, HarnessError> {
        point_of(&self.goal, "goal")
    }

    pub fn plan_config(&self) -> PlanConfig {
        PlanConfig {
            invisible_cost: self.features.invisible_cost,
            passage_mode: self.features.passage_mode,
            ..self.config
        }
    }

    pub fn load_grid(&self) -> Result<OccupancyGrid, HarnessError> {
        if let Some(name) = self.map.strip_prefix("builtin:") {
            return builtin_map(name).ok_or_else(|| HarnessError::UnknownMap(name.to_string()));
        }
        let path = match &self.base_dir {
            Some(dir) if Path::new(&self.map).is_relative() => dir.join(&self.map),
            _ => PathBuf::from(&self.map),
        };
        Ok(load_map(path)?)
    }
}

/// Names accepted by `builtin:<name>`.
pub const BUILTIN_MAPS: [&str; 5] = ["doorway", "corridor", "pillar", "wall", "emergence"];

const BUILTIN_RES: f64 = 0.05;

fn blank(width_m: f64, height_m: f64, origin: WorldPoint) -> OccupancyGrid {
    let w = (width_m / BUILTIN_RES).round() as usize;
    let h = (height_m / BUILTIN_RES).round() as usize;
    OccupancyGrid::empty(w, h, BUILTIN_RES, origin).expect("valid built-in dimensions")
}

fn rect(g: &mut OccupancyGrid, x0: f64, y0: f64, x1: f64, y1: f64, occupied: bool) {
    g.fill_rect(WorldPoint::new(x0, y0), WorldPoint::new(x1, y1), occupied);
}

/// Hand-built maps for the canonical scenarios.
pub fn builtin_map(name: &str) -> Option<OccupancyGrid> {
    match name {
        // two rooms joined by a 1.2 m door in a wall at x = 6.0..6.2
        "doorway" => {
            let mut g = blank(12.0, 8.0, WorldPoint::default());
            rect(&mut g, 6.0, 0.0, 6.2, 8.0, true);
            rect(&mut g, 6.0, 3.4, 6.2, 4.6, false);
            Some(g)
        }
        // corridor y in [3, 6] with one opening on each side into open rooms
        "corridor" => {
            let mut g = blank(16.0, 9.0, WorldPoint::default());
            rect(&mut g, 0.0, 2.8, 16.0, 3.0, true);
            rect(&mut g, 0.0, 6.0, 16.0, 6.2, true);
            rect(&mut g, 5.0, 6.0, 6.5, 6.2, false);
            rect(&mut g, 10.0, 2.8, 11.5, 3.0, false);
            Some(g)
        }
        // 6 m wide hall with a square pillar in the middle
        "pillar" => {
            let mut g = blank(16.0, 6.0, WorldPoint::default());
            rect(&mut g, 7.5, 2.5, 8.5, 3.5, true);
            Some(g)
        }
        // wall stub hanging from the top, leaving a passage above the bottom wall
        "wall" => {
            let mut g = blank(10.0, 6.0, WorldPoint::default());
            rect(&mut g, 0.0, 0.0, 10.0, 1.0, true);
            rect(&mut g, 5.0, 3.4, 5.2, 6.0, true);
            Some(g)
        }
        // main corridor y in [-1.5, 1.5] with a side corridor joining from +y at x 6..7.5
        "emergence" => {
            let mut g = blank(14.0, 10.0, WorldPoint::new(0.0, -2.0));
            rect(&mut g, 0.0, -2.0, 14.0, 8.0, true);
            rect(&mut g, 0.0, -1.5, 14.0, 1.5, false);
            rect(&mut g, 6.0, -1.5, 7.5, 8.0, false);
            Some(g)
        }
        _ => None,
    }
}

/// Canonical scenario for each built-in map.
pub fn builtin_scenario(name: &str) -> Option<Scenario> {
    let (start, goal, humans) = match name {
        "doorway" => (vec![2.0, 4.0, 0.0], vec![11.0, 4.0], vec![]),
        "corridor" => (vec![1.0, 4.5, 0.0], vec![15.0, 4.5], vec![]),
        "pillar" => (vec![1.0, 3.0, 0.0], vec![15.0, 3.0], vec![]),
        "wall" => (vec![1.0, 2.5, 0.0], vec![9.0, 2.5], vec![]),
        // walks down the side corridor, then along the main corridor toward the robot
        "emergence" => (
            vec![1.0, 0.0, 0.0],
            vec![13.0, 0.0],
            vec![HumanScript {
                script: vec![[6.75, 6.0, 0.0], [6.75, 0.3, 5.0], [1.0, 0.3, 9.5]],
            }],
        ),
        _ => return None,
    };
    Some(Scenario {
        map: format!("builtin:{name}"),
        start,
        goal,
        humans,
        features: Features::default(),
        seed: 1,
        duration_s: 45.0,
        planner: PlannerKind::Optimizer,
        jitter: Jitter::default(),
        config: PlanConfig::default(),
        base_dir: None,
    })
}

/// One simulated control cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRow {
    pub t: f64,
    pub pose: Pose2D,
    pub command: WorldPoint,
    pub mode: PlanMode,
    pub passage: PassageKind,
    pub n_detections: usize,
    /// Detection positions; not stored in the CSV.
    pub detections: Vec<WorldPoint>,
    pub min_dist_inv: Option<f64>,
    pub min_dist_vis: Option<f64>,
    /// Distance to the nearest scripted human, visible or not.
    pub min_dist_human: Option<f64>,
}

impl CycleRow {
    pub fn speed(&self) -> f64 {
        self.command.norm()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunRecord {
    pub rows: Vec<CycleRow>,
    pub completed: bool,
    /// Planning failure that ended the run early.
    pub failure: Option<String>,
}

pub const RECORD_HEADER: &str = "t,x,y,vx,vy,mode,n_detections,min_dist_inv,min_dist_vis";

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "inf".to_string(), |d| format!("{d:.6}"))
}

fn mode_str(m: PlanMode) -> &'static str {
    match m {
        PlanMode::Normal => "normal",
        PlanMode::PassThrough => "pass_through",
    }
}

impl RunRecord {
    pub fn path(&self) -> Vec<WorldPoint> {
        self.rows.iter().map(|r| r.pose.position).collect()
    }

    pub fn speeds(&self) -> Vec<f64> {
        self.rows.iter().map(CycleRow::speed).collect()
    }

    /// Minimum distance to any scripted human over the run.
    pub fn min_human_distance(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.min_dist_human)
            .min_by(f64::total_cmp)
    }

    pub fn path_length(&self) -> f64 {
        crate::plan::polyline_length(&self.path())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(RECORD_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:.3},{:.6},{:.6},{:.6},{:.6},{},{},{},{}",
                r.t,
                r.pose.position.x,
                r.pose.position.y,
                r.command.x,
                r.command.y,
                mode_str(r.mode),
                r.n_detections,
                fmt_opt(r.min_dist_inv),
                fmt_opt(r.min_dist_vis)
            );
        }
        out
    }

    /// Parses a record CSV. Detection positions and human distances are not stored in
    /// the CSV and come back empty.
    pub fn from_csv(text: &str) -> Result<Self, HarnessError> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == RECORD_HEADER => {}
            _ => return Err(HarnessError::Invalid("missing record CSV header".into())),
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = || HarnessError::Invalid(format!("bad record row {}", i + 2));
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 9 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            let opt = |s: &str| -> Result<Option<f64>, HarnessError> {
                if s == "inf" {
                    Ok(None)
                } else {
                    num(s).map(Some)
                }
            };
            let mode = match f[5] {
                "normal" => PlanMode::Normal,
                "pass_through" => PlanMode::PassThrough,
                _ => return Err(bad()),
            };
            let command = WorldPoint::new(num(f[3])?, num(f[4])?);
            let n: usize = f[6].parse().map_err(|_| bad())?;
            rows.push(CycleRow {
                t: num(f[0])?,
                pose: Pose2D::new(num(f[1])?, num(f[2])?, command.angle()),
                command,
                mode,
                passage: PassageKind::NoPassage,
                n_detections: n,
                detections: Vec::new(),
                min_dist_inv: opt(f[7])?,
                min_dist_vis: opt(f[8])?,
                min_dist_human: None,
            });
        }
        Ok(Self {
            rows,
            completed: false,
            failure: None,
        })
    }
}

fn line_of_sight(grid: &OccupancyGrid, from: WorldPoint, to: WorldPoint, max_range: f64) -> bool {
    let d = from.distance(to);
    if d > max_range {
        return false;
    }
    if d == 0.0 {
        return true;
    }
    grid.raycast(from, (to - from).angle(), d) >= d
}

/// Loads the scenario's map and simulates it.
pub fn run_scenario(s: &Scenario) -> Result<RunRecord, HarnessError> {
    let grid = s.load_grid()?;
    run_scenario_on(s, grid)
}

/// Simulates `s` on an already loaded grid. Input errors are returned; planning
/// failures end the run and are reported in the record.
pub fn run_scenario_on(s: &Scenario, grid: OccupancyGrid) -> Result<RunRecord, HarnessError> {
    if !(s.duration_s > 0.0) || !s.duration_s.is_finite() {
        return Err(HarnessError::Invalid("duration_s must be positive".into()));
    }
    for h in &s.humans {
        h.validate()?;
    }
    let config = s.plan_config();
    let planner = Planner::new(grid, config)?;
    let grid = planner.grid();

    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut start = s.start_pose()?;
    if s.jitter.start > 0.0 {
        let j = s.jitter.start;
        start.position = start.position + WorldPoint::new(rng.gen_range(-j..=j), rng.gen_range(-j..=j));
    }
    let shifts: Vec<f64> = s
        .humans
        .iter()
        .map(|_| {
            if s.jitter.timing > 0.0 {
                rng.gen_range(-s.jitter.timing..=s.jitter.timing)
            } else {
                0.0
            }
        })
        .collect();
    let goal = s.goal_point()?;
    if grid.is_occupied(start.position) {
        return Err(HarnessError::Invalid(format!("start {} is occupied", start.position)));
    }
    if grid.is_occupied(goal) {
        return Err(HarnessError::Invalid(format!("goal {goal} is occupied")));
    }

    let dt = config.cycle_dt;
    let max_range = ScanConfig::default().max_range;
    let steps = (s.duration_s / dt).round() as usize;
    let mut state = NavState::new(start);
    let mut record = RunRecord::default();
    for step in 0..=steps {
        let t = step as f64 * dt;
        state.time = t;
        let pose = state.pose();
        let robot = pose.position;
        let humans: Vec<(WorldPoint, WorldPoint)> = s
            .humans
            .iter()
            .zip(&shifts)
            .map(|(h, shift)| (h.position_at(t - shift), h.velocity_at(t - shift)))
            .collect();
        let visible: Vec<VisibleHuman> = humans
            .iter()
            .filter(|(p, _)| line_of_sight(grid, robot, *p, max_range))
            .map(|&(position, velocity)| VisibleHuman { position, velocity })
            .collect();
        let min_dist_human = humans.iter().map(|(p, _)| robot.distance(*p)).min_by(f64::total_cmp);

        let outcome = match s.planner {
            PlannerKind::Optimizer => control_cycle(&mut state, &World { goal, visible: &visible }, &planner)
                .map(|(cmd, d)| {
                    let dets = d.detections.iter().map(|h| h.position).collect();
                    (cmd, d.mode, d.passage.kind, dets, d.min_dist_inv, d.goal_reached)
                }),
            PlannerKind::Naive => naive_cycle(&planner, pose, goal).map(|(cmd, reached)| {
                let dets = detect(grid, pose, &config.detection)
                    .map(|(_, hs)| hs.iter().map(|h| h.position).collect::<Vec<_>>())
                    .unwrap_or_default();
                let inv = dets.iter().map(|p: &WorldPoint| robot.distance(*p)).min_by(f64::total_cmp);
                (cmd, PlanMode::Normal, PassageKind::NoPassage, dets, inv, reached)
            }),
        };
        let (command, mode, passage, detections, min_dist_inv, reached) = match outcome {
            Ok(o) => o,
            Err(e) => {
                record.failure = Some(e.to_string());
                break;
            }
        };
        record.rows.push(CycleRow {
            t,
            pose,
            command,
            mode,
            passage,
            n_detections: detections.len(),
            detections,
            min_dist_inv,
            min_dist_vis: visible.iter().map(|h| robot.distance(h.position)).min_by(f64::total_cmp),
            min_dist_human,
        });
        if reached {
            record.completed = true;
            break;
        }
        let next = robot + command * dt;
        let heading = if command.norm() > 0.05 {
            command.angle()
        } else {
            pose.heading
        };
        state.pose = Some(Pose2D::new(next.x, next.y, heading));
    }
    Ok(record)
}

/// Shortest-path baseline: full speed along the seed path, no human awareness.
fn naive_cycle(planner: &Planner, pose: Pose2D, goal: WorldPoint) -> Result<(WorldPoint, bool), crate::plan::PlanError> {
    let cfg = planner.config();
    if pose.position.distance(goal) < cfg.goal_tolerance {
        return Ok((WorldPoint::default(), true));
    }
    let path = planner.seed_path(pose.position, goal)?;
    let target = point_at(&path, cfg.vmax * cfg.cycle_dt);
    Ok(((target - pose.position) * (1.0 / cfg.cycle_dt), false))
}
