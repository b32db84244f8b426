//! Emulated 2D laser scanner mounted on the robot base.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridmap::{OccupancyGrid, WorldPoint};

#[derive(Error, Debug, PartialEq)]
pub enum ScanError {
    #[error("pose {0} lies in an occupied cell")]
    PoseOccupied(WorldPoint),
    #[error("invalid scan config: {0}")]
    InvalidConfig(String),
    #[error("bearing {0:.4} rad is outside the scanner field of view")]
    OutsideFov(f64),
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub position: WorldPoint,
    pub heading: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            position: WorldPoint::new(x, y),
            heading: normalize_angle(heading),
        }
    }

    /// Bearing of a world point in this pose's frame, in `(-pi, pi]`.
    pub fn bearing_to(&self, p: WorldPoint) -> f64 {
        let d = p - self.position;
        normalize_angle(d.y.atan2(d.x) - self.heading)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    pub ray_count: usize,
    /// Angle of ray 0 in the robot frame.
    pub angle_min: f64,
    /// Angle of the last ray in the robot frame.
    pub angle_max: f64,
    pub max_range: f64,
    pub front_limit: f64,
}

impl Default for ScanConfig {
    /// 720 rays over the full circle (0.5 deg spacing), 7 m range, 5 m detection limit.
    fn default() -> Self {
        let ray_count = 720;
        Self {
            ray_count,
            angle_min: -PI,
            angle_max: PI - TAU / ray_count as f64,
            max_range: 7.0,
            front_limit: 5.0,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<(), ScanError> {
        if self.ray_count < 8 {
            return Err(ScanError::InvalidConfig(format!(
                "ray_count must be >= 8, got {}",
                self.ray_count
            )));
        }
        if !(self.angle_min < self.angle_max) {
            return Err(ScanError::InvalidConfig("angle_min must be < angle_max".into()));
        }
        if self.angle_max - self.angle_min > TAU + 1e-9 {
            return Err(ScanError::InvalidConfig("field of view exceeds a full turn".into()));
        }
        if !(self.max_range > 0.0) {
            return Err(ScanError::InvalidConfig("max_range must be positive".into()));
        }
        if !(self.front_limit > 0.0 && self.front_limit <= self.max_range) {
            return Err(ScanError::InvalidConfig(
                "front_limit must be in (0, max_range]".into(),
            ));
        }
        Ok(())
    }

    pub fn increment(&self) -> f64 {
        (self.angle_max - self.angle_min) / (self.ray_count - 1) as f64
    }

    pub fn angle_of(&self, index: usize) -> f64 {
        self.angle_min + index as f64 * self.increment()
    }

    /// True when the rays cover the whole circle (the last ray is one increment short
    /// of the first one, modulo 2pi).
    pub fn is_full_circle(&self) -> bool {
        let span = self.angle_max - self.angle_min + self.increment();
        (span - TAU).abs() < 1e-9
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaserScan {
    pub pose: Pose2D,
    pub config: ScanConfig,
    pub ranges: Vec<f64>,
}

impl LaserScan {
    /// Ray angle in the world frame.
    pub fn world_angle(&self, index: usize) -> f64 {
        self.pose.heading + self.config.angle_of(index)
    }

    pub fn endpoint(&self, index: usize) -> WorldPoint {
        self.pose.position + WorldPoint::from_polar(self.ranges[index], self.world_angle(index))
    }

    pub fn endpoints(&self) -> Vec<WorldPoint> {
        (0..self.ranges.len()).map(|i| self.endpoint(i)).collect()
    }

    /// Nearest ray index to a robot-frame bearing. Ties go to the lower index.
    pub fn index_at_angle(&self, beta: f64) -> Result<usize, ScanError> {
        let cfg = &self.config;
        let n = self.ranges.len();
        let inc = cfg.increment();
        let rel = (beta - cfg.angle_min).rem_euclid(TAU);
        if cfg.is_full_circle() {
            let k = rel / inc;
            let lower = k.floor();
            let frac = k - lower;
            let idx = if frac > 0.5 { lower as usize + 1 } else { lower as usize };
            // rel/inc can land on n itself after rounding
            return Ok(idx % n);
        }
        let span = cfg.angle_max - cfg.angle_min;
        // allow half a ray of slack at either edge
        let rel = if rel > span + 0.5 * inc && TAU - rel <= 0.5 * inc {
            rel - TAU
        } else {
            rel
        };
        if rel < -0.5 * inc - 1e-12 || rel > span + 0.5 * inc + 1e-12 {
            return Err(ScanError::OutsideFov(beta));
        }
        let k = rel / inc;
        let lower = k.floor();
        let idx = if k - lower > 0.5 { lower + 1.0 } else { lower };
        Ok((idx.max(0.0) as usize).min(n - 1))
    }

    /// Range of the ray nearest to `beta` (robot frame), no interpolation.
    pub fn range_at_angle(&self, beta: f64) -> Result<f64, ScanError> {
        Ok(self.ranges[self.index_at_angle(beta)?])
    }

    /// `index,angle_rad,range_m` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,angle_rad,range_m\n");
        for (i, r) in self.ranges.iter().enumerate() {
            let _ = writeln!(out, "{},{:.9},{:.9}", i, self.config.angle_of(i), r);
        }
        out
    }
}

/// Casts every ray of `config` from `pose`.
pub fn simulate_scan(
    grid: &OccupancyGrid,
    pose: Pose2D,
    config: &ScanConfig,
) -> Result<LaserScan, ScanError> {
    config.validate()?;
    if grid.is_occupied(pose.position) {
        return Err(ScanError::PoseOccupied(pose.position));
    }
    let ranges = (0..config.ray_count)
        .map(|i| {
            grid.raycast(
                pose.position,
                pose.heading + config.angle_of(i),
                config.max_range,
            )
        })
        .collect();
    Ok(LaserScan {
        pose,
        config: *config,
        ranges,
    })
}
