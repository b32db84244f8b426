//! Doorway / pillar / wall-passage recognition from invisible-human detections.

use serde::{Deserialize, Serialize};

use crate::detect::InvisibleHuman;
use crate::gridmap::WorldPoint;
use crate::scan::{normalize_angle, LaserScan};

/// Geometric acceptance window for the robot/human/human triangle. The side window
/// also bounds the robot-to-corner distance of a single-human wall passage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PassageLimits {
    pub base_max: f64,
    pub base_min: f64,
    pub side_max: f64,
    pub side_min: f64,
    /// Allowed relative difference between the two equal sides.
    pub isosceles_tol: f64,
    /// Wall passage: max difference between the mirrored range and the human distance.
    pub wall_diff_max: f64,
}

impl Default for PassageLimits {
    fn default() -> Self {
        Self {
            base_max: 3.0,
            base_min: 1.6,
            side_max: 2.0,
            side_min: 0.8,
            isosceles_tol: 0.15,
            wall_diff_max: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PassageKind {
    Doorway,
    Pillar,
    WallPassage,
    NoPassage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassageClass {
    pub kind: PassageKind,
    /// Base midpoint for Doorway/Pillar, the human for WallPassage.
    pub anchor: Option<WorldPoint>,
    /// The base vertices (one point for a wall passage). Used to latch pass-through
    /// mode until the robot crosses the passage.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub vertices: Vec<WorldPoint>,
}

impl PassageClass {
    pub fn none() -> Self {
        Self {
            kind: PassageKind::NoPassage,
            anchor: None,
            vertices: Vec::new(),
        }
    }

    pub fn is_passage(&self) -> bool {
        self.kind != PassageKind::NoPassage
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanMode {
    Normal,
    PassThrough,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanDirective {
    pub mode: PlanMode,
    pub disable_invisible_cost: bool,
    pub vmax_cap: Option<f64>,
}

/// Speed cap while passing through a detected passage (m/s).
pub const PASS_THROUGH_VMAX: f64 = 0.3;

impl PlanDirective {
    pub fn normal() -> Self {
        Self {
            mode: PlanMode::Normal,
            disable_invisible_cost: false,
            vmax_cap: None,
        }
    }

    pub fn pass_through() -> Self {
        Self {
            mode: PlanMode::PassThrough,
            disable_invisible_cost: true,
            vmax_cap: Some(PASS_THROUGH_VMAX),
        }
    }
}

pub fn passage_directive(cls: &PassageClass) -> PlanDirective {
    match cls.kind {
        PassageKind::Doorway | PassageKind::Pillar | PassageKind::WallPassage => {
            PlanDirective::pass_through()
        }
        PassageKind::NoPassage => PlanDirective::normal(),
    }
}

struct Triangle {
    a: WorldPoint,
    b: WorldPoint,
    mean_side: f64,
}

fn candidate(robot: WorldPoint, a: WorldPoint, b: WorldPoint, limits: &PassageLimits) -> Option<Triangle> {
    let sa = robot.distance(a);
    let sb = robot.distance(b);
    let base = a.distance(b);
    let isosceles = (sa - sb).abs() <= limits.isosceles_tol * sa.max(sb);
    let base_ok = base >= limits.base_min && base <= limits.base_max;
    let sides_ok = [sa, sb]
        .iter()
        .all(|s| *s >= limits.side_min && *s <= limits.side_max);
    (isosceles && base_ok && sides_ok).then_some(Triangle {
        a,
        b,
        mean_side: 0.5 * (sa + sb),
    })
}

/// Classifies the passage situation in front of the robot.
pub fn classify_passage(
    humans: &[InvisibleHuman],
    scan: &LaserScan,
    limits: &PassageLimits,
) -> PassageClass {
    let robot = scan.pose.position;
    let mut best: Option<Triangle> = None;
    for i in 0..humans.len() {
        for j in (i + 1)..humans.len() {
            if let Some(t) = candidate(robot, humans[i].position, humans[j].position, limits) {
                if best.as_ref().is_none_or(|b| t.mean_side < b.mean_side) {
                    best = Some(t);
                }
            }
        }
    }

    if let Some(t) = best {
        let mid = (t.a + t.b) * 0.5;
        let bisector = robot.distance(mid);
        let center = scan.range_at_angle(0.0).unwrap_or(f64::INFINITY);
        let kind = if center < bisector {
            PassageKind::Pillar
        } else {
            PassageKind::Doorway
        };
        return PassageClass {
            kind,
            anchor: Some(mid),
            vertices: vec![t.a, t.b],
        };
    }

    if let [h] = humans {
        let reach = robot.distance(h.source_corner);
        if reach < limits.side_min || reach > limits.side_max {
            return PassageClass::none();
        }
        let side = robot.distance(h.position);
        let corner_angle = scan.config.angle_of(h.corner_index);
        let mirrored = normalize_angle(-corner_angle);
        if let Ok(range) = scan.range_at_angle(mirrored) {
            if (range - side).abs() < limits.wall_diff_max {
                return PassageClass {
                    kind: PassageKind::WallPassage,
                    anchor: Some(h.position),
                    vertices: vec![h.position],
                };
            }
        }
    }

    PassageClass::none()
}
