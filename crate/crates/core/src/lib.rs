//! Occupancy-grid navigation toolkit: laser emulation, invisible-human detection
//! behind occluding corners, passage recognition, and a local trajectory optimizer
//! that slows the robot near blind corners.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cost;
pub mod detect;
pub mod gridmap;
pub mod harness;
pub mod passage;
pub mod plan;
pub mod scan;

pub use cost::{invisible_cost, trajectory_cost, InvisibleCostParams};
pub use detect::{detect, DetectionParams, InvisibleHuman};
pub use gridmap::{load_map, OccupancyGrid, WorldPoint};
pub use passage::{classify_passage, passage_directive, PassageClass, PassageKind, PlanDirective, PlanMode};
pub use plan::{control_cycle, optimize_cycle, PlanConfig, Planner, TimedTrajectory};
pub use scan::{simulate_scan, LaserScan, Pose2D, ScanConfig};
