//! Detection behavior on hand-built maps and random mazes.

mod common;

use occnav::detect::{detect, find_gap_pairs, is_outside_contour, DetectionParams};
use occnav::gridmap::{OccupancyGrid, WorldPoint};
use occnav::harness::generate_maze;
use occnav::scan::{normalize_angle, Pose2D};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 10 x 6 m room with 0.2 m walls.
fn closed_room() -> OccupancyGrid {
    let mut g = OccupancyGrid::empty(200, 120, 0.05, WorldPoint::default()).unwrap();
    g.fill_rect(WorldPoint::new(0.0, 0.0), WorldPoint::new(10.0, 0.2), true);
    g.fill_rect(WorldPoint::new(0.0, 5.8), WorldPoint::new(10.0, 6.0), true);
    g.fill_rect(WorldPoint::new(0.0, 0.0), WorldPoint::new(0.2, 6.0), true);
    g.fill_rect(WorldPoint::new(9.8, 0.0), WorldPoint::new(10.0, 6.0), true);
    g
}

/// Horizontal corridor y in [2, 4] with a side corridor going up at x in [5, 7].
fn t_junction() -> OccupancyGrid {
    let mut g = OccupancyGrid::empty(240, 200, 0.05, WorldPoint::default()).unwrap();
    g.fill_rect(WorldPoint::new(0.0, 0.0), WorldPoint::new(12.0, 2.0), true);
    g.fill_rect(WorldPoint::new(0.0, 4.0), WorldPoint::new(5.0, 10.0), true);
    g.fill_rect(WorldPoint::new(7.0, 4.0), WorldPoint::new(12.0, 10.0), true);
    g
}

#[test]
fn closed_convex_room_has_no_detections() {
    let g = closed_room();
    let params = DetectionParams::default();
    for pose in [Pose2D::new(5.0, 3.0, 0.0), Pose2D::new(1.0, 1.0, 2.0), Pose2D::new(8.5, 4.5, -1.0)] {
        let (scan, humans) = detect(&g, pose, &params).unwrap();
        assert!(find_gap_pairs(&scan, &params).is_empty());
        assert!(humans.is_empty(), "{pose:?}");
    }
}

#[test]
fn side_corridor_yields_one_hidden_detection_per_corner() {
    let g = t_junction();
    let params = DetectionParams::default();
    let (scan, humans) = detect(&g, Pose2D::new(2.0, 3.0, 0.0), &params).unwrap();
    assert!(!humans.is_empty());
    for h in &humans {
        assert!(common::soundness_violations(&g, &scan, h, &params).is_empty());
        // hidden humans stand in the side corridor, not in the lit main corridor
        assert!(h.position.y > 4.0, "{}", h.position);
        assert!(h.position.x > 5.0 && h.position.x < 7.0, "{}", h.position);
        let expected = normalize_angle((scan.pose.position - h.position).angle());
        assert!((normalize_angle(h.direction) - expected).abs() < 1e-12);
        assert!((h.distance_to_robot - h.position.distance(scan.pose.position)).abs() < 1e-12);
    }
    // the near jamb at (5, 4) is the source of a detection
    assert!(humans.iter().any(|h| h.source_corner.distance(WorldPoint::new(5.0, 4.0)) < 0.1));
}

#[test]
fn corner_behind_robot_is_ignored() {
    let g = t_junction();
    let params = DetectionParams::default();
    let (_, humans) = detect(&g, Pose2D::new(9.0, 3.0, 0.0), &params).unwrap();
    assert!(humans.is_empty());
}

#[test]
fn front_limit_filters_far_corners() {
    let g = t_junction();
    let near = DetectionParams {
        front_limit: 1.0,
        ..DetectionParams::default()
    };
    let (_, humans) = detect(&g, Pose2D::new(1.0, 3.0, 0.0), &near).unwrap();
    assert!(humans.is_empty());
}

#[test]
fn detection_is_deterministic() {
    let g = generate_maze(3, 64, 64, 1.4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for pose in common::free_poses(&g, &mut rng, 10, 0.3) {
        let a = detect(&g, pose, &DetectionParams::default()).unwrap();
        let b = detect(&g, pose, &DetectionParams::default()).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn contour_test_is_strict() {
    let g = closed_room();
    let (scan, _) = detect(&g, Pose2D::new(5.0, 3.0, 0.0), &DetectionParams::default()).unwrap();
    let on_contour = scan.endpoint(360);
    assert!(!is_outside_contour(&scan, on_contour));
    assert!(is_outside_contour(&scan, on_contour + WorldPoint::new(0.01, 0.0)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_maze_detections_are_sound(seed in 0u64..10_000, cw in 1.0f64..2.0, pose_seed in 0u64..1000) {
        let g = generate_maze(seed, 48, 48, cw).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(pose_seed);
        let params = DetectionParams::default();
        for pose in common::free_poses(&g, &mut rng, 3, 0.3) {
            let (scan, humans) = detect(&g, pose, &params).unwrap();
            for h in &humans {
                let v = common::soundness_violations(&g, &scan, h, &params);
                prop_assert!(v.is_empty(), "{:?}", v);
                prop_assert!(h.source_corner.distance(pose.position) <= params.front_limit + 1e-9);
            }
            for (i, a) in humans.iter().enumerate() {
                for b in &humans[i + 1..] {
                    prop_assert!(a.position.distance(b.position) >= params.h_rad);
                }
            }
        }
    }

    #[test]
    fn gap_pairs_match_a_direct_recount(seed in 0u64..10_000, pose_seed in 0u64..1000) {
        let g = generate_maze(seed, 40, 40, 1.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(pose_seed);
        let params = DetectionParams::default();
        for pose in common::free_poses(&g, &mut rng, 2, 0.3) {
            let (scan, _) = detect(&g, pose, &params).unwrap();
            let pairs = find_gap_pairs(&scan, &params);
            let mut expected = Vec::new();
            for i in 0..scan.ranges.len() - 1 {
                let (a, b) = (scan.endpoint(i), scan.endpoint(i + 1));
                if a.distance(b) <= params.gap_threshold {
                    continue;
                }
                let corner = if scan.ranges[i] <= scan.ranges[i + 1] { a } else { b };
                let d = corner - pose.position;
                let bearing = normalize_angle(d.y.atan2(d.x) - pose.heading);
                if d.norm() <= params.front_limit && bearing.abs() <= std::f64::consts::FRAC_PI_2 {
                    expected.push(i);
                }
            }
            let got: Vec<usize> = pairs.iter().map(|p| p.index1).collect();
            prop_assert_eq!(got, expected);
            for p in &pairs {
                prop_assert!(p.v1.distance(pose.position) <= p.v2.distance(pose.position));
            }
        }
    }
}
