//! Local planner behavior: descent, speed limits, cost isolation and the influence of
//! the invisible-human weight on closed-loop runs.

mod common;

use occnav::cost::trajectory_cost;
use occnav::detect::{detect, DetectionParams, InvisibleHuman};
use occnav::gridmap::{OccupancyGrid, WorldPoint};
use occnav::harness::{builtin_map, builtin_scenario, run_scenario};
use occnav::passage::PlanDirective;
use occnav::plan::{segment_clear, PlanConfig, PlanError, Planner, VisibleHuman};
use occnav::scan::Pose2D;
use proptest::prelude::*;

fn open_planner() -> Planner {
    let g = OccupancyGrid::empty(200, 120, 0.05, WorldPoint::default()).unwrap();
    Planner::new(g, PlanConfig::default()).unwrap()
}

fn human_at(p: WorldPoint) -> InvisibleHuman {
    InvisibleHuman {
        position: p,
        direction: 0.0,
        source_corner: p,
        corner_index: 0,
        gap_index: 0,
        distance_to_robot: 0.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn descent_never_increases_the_objective(
        sx in 1.0f64..4.0, sy in 1.0f64..5.0,
        gx in 6.0f64..9.0, gy in 1.0f64..5.0,
        hx in 2.0f64..8.0, hy in 0.5f64..5.5,
    ) {
        let planner = open_planner();
        let pose = Pose2D::new(sx, sy, 0.0);
        let goal = WorldPoint::new(gx, gy);
        let inv = [human_at(WorldPoint::new(hx, hy))];
        let vis = [VisibleHuman { position: WorldPoint::new(hy + 2.0, hx * 0.5), velocity: WorldPoint::new(-0.5, 0.1) }];
        let prob = planner.problem(pose, goal, &inv, &vis, &PlanDirective::normal()).unwrap();
        let x0 = planner.initial_positions(pose, &prob, None, 0.1);
        let f0 = planner.objective(&x0, &prob);
        let x = planner.descend(x0, &prob);
        prop_assert!(planner.objective(&x, &prob) <= f0);
        prop_assert_eq!(x[0], pose.position);
    }

    #[test]
    fn trajectories_respect_the_speed_cap(
        sx in 1.0f64..4.0, sy in 1.0f64..5.0,
        gx in 6.0f64..9.0, gy in 1.0f64..5.0,
        hx in 2.0f64..8.0, hy in 0.5f64..5.5,
        pass in any::<bool>(),
    ) {
        let planner = open_planner();
        let directive = if pass { PlanDirective::pass_through() } else { PlanDirective::normal() };
        let cap = directive.vmax_cap.unwrap_or(planner.config().vmax);
        let inv = [human_at(WorldPoint::new(hx, hy))];
        let traj = planner
            .optimize_cycle(Pose2D::new(sx, sy, 0.0), WorldPoint::new(gx, gy), &inv, &[], &directive, None, 0.1)
            .unwrap();
        prop_assert_eq!(traj.waypoints.len(), planner.config().waypoint_count);
        for v in traj.speeds() {
            prop_assert!(v <= cap + 1e-9, "speed {} above cap {}", v, cap);
        }
        let times = traj.times();
        prop_assert_eq!(times[0], 0.0);
        prop_assert!((times[times.len() - 1] - planner.config().horizon).abs() < 1e-9);
    }

    #[test]
    fn zero_weight_equals_no_detections(hx in 2.0f64..8.0, hy in 0.5f64..5.5) {
        let g = OccupancyGrid::empty(200, 120, 0.05, WorldPoint::default()).unwrap();
        let mut config = PlanConfig::default();
        config.weights.invisible = 0.0;
        let planner = Planner::new(g, config).unwrap();
        let pose = Pose2D::new(1.0, 3.0, 0.0);
        let goal = WorldPoint::new(9.0, 3.0);
        let inv = [human_at(WorldPoint::new(hx, hy))];
        let with = planner.optimize_cycle(pose, goal, &inv, &[], &PlanDirective::normal(), None, 0.1).unwrap();
        let without = planner.optimize_cycle(pose, goal, &[], &[], &PlanDirective::normal(), None, 0.1).unwrap();
        prop_assert_eq!(with, without);
    }
}

#[test]
fn pass_through_ignores_invisible_humans() {
    let planner = open_planner();
    let pose = Pose2D::new(1.0, 3.0, 0.0);
    let goal = WorldPoint::new(9.0, 3.0);
    let inv = [human_at(WorldPoint::new(2.5, 3.2))];
    let d = PlanDirective::pass_through();
    let with = planner.optimize_cycle(pose, goal, &inv, &[], &d, None, 0.1).unwrap();
    let without = planner.optimize_cycle(pose, goal, &[], &[], &d, None, 0.1).unwrap();
    assert_eq!(with, without);
}

#[test]
fn invisible_cost_term_lowers_the_near_term_cost() {
    let planner = open_planner();
    let pose = Pose2D::new(1.0, 3.0, 0.0);
    let goal = WorldPoint::new(9.0, 3.0);
    let inv = [human_at(WorldPoint::new(1.6, 3.4))];
    let with = planner.optimize_cycle(pose, goal, &inv, &[], &PlanDirective::normal(), None, 0.1).unwrap();
    let without = planner.optimize_cycle(pose, goal, &[], &[], &PlanDirective::normal(), None, 0.1).unwrap();
    let params = planner.config().cost;
    let c_with = trajectory_cost(&with, &inv, &params).unwrap();
    let c_without = trajectory_cost(&without, &inv, &params).unwrap();
    assert!(c_with < c_without, "{c_with} vs {c_without}");
}

#[test]
fn planning_is_deterministic() {
    let g = builtin_map("doorway").unwrap();
    let planner = Planner::new(g.clone(), PlanConfig::default()).unwrap();
    let pose = Pose2D::new(4.0, 4.0, 0.0);
    let (_, inv) = detect(&g, pose, &DetectionParams::default()).unwrap();
    let a = planner.optimize_cycle(pose, WorldPoint::new(11.0, 4.0), &inv, &[], &PlanDirective::normal(), None, 0.1);
    let b = planner.optimize_cycle(pose, WorldPoint::new(11.0, 4.0), &inv, &[], &PlanDirective::normal(), None, 0.1);
    assert_eq!(a.unwrap(), b.unwrap());
}

#[test]
fn seed_path_keeps_clearance() {
    let g = builtin_map("corridor").unwrap();
    let planner = Planner::new(g, PlanConfig::default()).unwrap();
    let path = planner.seed_path(WorldPoint::new(1.0, 4.5), WorldPoint::new(15.0, 4.5)).unwrap();
    for w in path.windows(2) {
        assert!(segment_clear(planner.field(), w[0], w[1], 0.3, 0.02));
    }
}

#[test]
fn unreachable_goal_is_an_error() {
    let mut g = OccupancyGrid::empty(200, 120, 0.05, WorldPoint::default()).unwrap();
    g.fill_rect(WorldPoint::new(5.0, 0.0), WorldPoint::new(5.2, 6.0), true);
    let planner = Planner::new(g, PlanConfig::default()).unwrap();
    let r = planner.optimize_cycle(Pose2D::new(1.0, 3.0, 0.0), WorldPoint::new(9.0, 3.0), &[], &[], &PlanDirective::normal(), None, 0.1);
    assert!(matches!(r, Err(PlanError::NoSeed { .. })));
}

/// Run-wide minimum distance to any invisible-human estimate.
fn min_inv_distance(name: &str, seed: u64, weight: f64) -> f64 {
    let mut s = builtin_scenario(name).unwrap();
    s.seed = seed;
    s.config.weights.invisible = weight;
    let rec = run_scenario(&s).unwrap();
    assert!(rec.failure.is_none(), "{name} seed {seed}: {:?}", rec.failure);
    rec.rows
        .iter()
        .filter_map(|r| r.min_dist_inv)
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn larger_invisible_weight_does_not_bring_the_robot_closer() {
    // detections move by up to one walk step between cycles
    let tol = DetectionParams::default().step();
    let default_w = PlanConfig::default().weights.invisible;
    for name in ["doorway", "corridor", "emergence"] {
        for seed in 1..=5 {
            let d: Vec<f64> = [0.0, default_w, 2.0 * default_w]
                .iter()
                .map(|&w| min_inv_distance(name, seed, w))
                .collect();
            assert!(d[1] >= d[0] - tol && d[2] >= d[1] - tol, "{name} seed {seed}: {d:?}");
        }
    }
}

#[test]
fn open_space_plan_hugs_the_segment() {
    let planner = open_planner();
    let pose = Pose2D::new(1.0, 3.0, 0.0);
    let goal = WorldPoint::new(9.0, 3.0);
    let mut prev = None;
    for _ in 0..5 {
        let t = planner.optimize_cycle(pose, goal, &[], &[], &PlanDirective::normal(), prev.as_ref(), 0.0).unwrap();
        prev = Some(t);
    }
    let a = pose.position;
    for p in prev.unwrap().positions() {
        let d = common::segment_distance(a, goal, p);
        assert!(d < 0.05, "waypoint {p:?} is {d} m off the segment");
    }
}

/// Closest approach of a single planned trajectory to any of the given detections.
fn plan_clearance(planner: &Planner, pose: Pose2D, goal: WorldPoint, inv: &[InvisibleHuman], use_cost: bool) -> f64 {
    let seen: &[InvisibleHuman] = if use_cost { inv } else { &[] };
    let t = planner.optimize_cycle(pose, goal, seen, &[], &PlanDirective::normal(), None, 0.1).unwrap();
    t.positions()
        .iter()
        .flat_map(|p| inv.iter().map(move |h| p.distance(h.position)))
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn doorway_plan_keeps_further_from_the_opening_with_the_cost() {
    let g = builtin_map("doorway").unwrap();
    let planner = Planner::new(g.clone(), PlanConfig::default()).unwrap();
    let goal = WorldPoint::new(11.0, 4.0);
    let mut checked = 0;
    for x in [3.5, 4.0, 4.5] {
        let pose = Pose2D::new(x, 4.0, 0.0);
        let (_, inv) = detect(&g, pose, &DetectionParams::default()).unwrap();
        if inv.is_empty() {
            continue;
        }
        checked += 1;
        let on = plan_clearance(&planner, pose, goal, &inv, true);
        let off = plan_clearance(&planner, pose, goal, &inv, false);
        assert!(on > off, "x={x}: {on} vs {off}");
    }
    assert!(checked > 0);
}
