//! Invisible-human trajectory cost.
//!
//! Each trajectory pose pays `V/d` for every invisible human while the pose is within
//! the human reaction time of the trajectory start, and `max((V - a*dt)/d, 0)` after.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::InvisibleHuman;
use crate::gridmap::WorldPoint;

#[derive(Error, Debug, PartialEq)]
pub enum CostError {
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("time offset must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("trajectory time offsets must start at 0 and strictly increase (index {0})")]
    NonMonotoneTime(usize),
    #[error("invalid cost params: {0}")]
    InvalidParams(String),
}

/// Smallest distance fed to [`invisible_cost`] by aggregating callers (m).
pub const DISTANCE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InvisibleCostParams {
    /// Human walking speed V (m/s).
    pub walking_speed: f64,
    /// Human deceleration a (m/s^2).
    pub deceleration: f64,
    /// Reaction time before the human starts braking (s).
    pub reaction_time: f64,
    pub weight: f64,
    /// Apply the deceleration to `dt - reaction_time` instead of `dt`.
    pub decel_after_reaction: bool,
}

impl Default for InvisibleCostParams {
    fn default() -> Self {
        Self {
            walking_speed: 1.3,
            deceleration: 2.94,
            reaction_time: 0.5,
            weight: 1.0,
            decel_after_reaction: false,
        }
    }
}

impl InvisibleCostParams {
    pub fn validate(&self) -> Result<(), CostError> {
        if !(self.walking_speed > 0.0) {
            return Err(CostError::InvalidParams("walking_speed must be > 0".into()));
        }
        if !(0.0..=2.94).contains(&self.deceleration) {
            return Err(CostError::InvalidParams(
                "deceleration must be within [0, 2.94]".into(),
            ));
        }
        if !(self.reaction_time >= 0.0) {
            return Err(CostError::InvalidParams("reaction_time must be >= 0".into()));
        }
        if !(self.weight >= 0.0) {
            return Err(CostError::InvalidParams("weight must be >= 0".into()));
        }
        Ok(())
    }
}

/// Cost of one pose at distance `d` from an invisible human, `dt` seconds into the plan.
pub fn invisible_cost(d: f64, dt: f64, params: &InvisibleCostParams) -> Result<f64, CostError> {
    if !(d > 0.0) {
        return Err(CostError::NonPositiveDistance(d));
    }
    if !(dt >= 0.0) {
        return Err(CostError::NegativeTime(dt));
    }
    Ok(unchecked_cost(d, dt, params))
}

#[inline]
pub(crate) fn unchecked_cost(d: f64, dt: f64, params: &InvisibleCostParams) -> f64 {
    let v = params.walking_speed;
    if dt <= params.reaction_time {
        v / d
    } else {
        let braking = if params.decel_after_reaction {
            dt - params.reaction_time
        } else {
            dt
        };
        ((v - params.deceleration * braking) / d).max(0.0)
    }
}

/// Time-stamped positions; anything that can expose `(position, time offset)` pairs.
pub trait TimedPoses {
    fn timed_poses(&self) -> Vec<(WorldPoint, f64)>;
}

impl TimedPoses for [(WorldPoint, f64)] {
    fn timed_poses(&self) -> Vec<(WorldPoint, f64)> {
        self.to_vec()
    }
}

pub fn check_time_offsets(times: impl IntoIterator<Item = f64>) -> Result<(), CostError> {
    let mut prev = None;
    for (i, t) in times.into_iter().enumerate() {
        let ok = match prev {
            None => t == 0.0,
            Some(p) => t > p,
        };
        if !ok {
            return Err(CostError::NonMonotoneTime(i));
        }
        prev = Some(t);
    }
    Ok(())
}

/// Weighted invisible-human cost summed over all poses and humans.
pub fn trajectory_cost<T: TimedPoses + ?Sized>(
    traj: &T,
    humans: &[InvisibleHuman],
    params: &InvisibleCostParams,
) -> Result<f64, CostError> {
    let poses = traj.timed_poses();
    check_time_offsets(poses.iter().map(|(_, t)| *t))?;
    Ok(poses
        .iter()
        .map(|(p, t)| pose_cost(*p, *t, humans, params))
        .sum())
}

/// Weighted cost contribution of a single pose (no timestamp checks).
pub fn pose_cost(p: WorldPoint, dt: f64, humans: &[InvisibleHuman], params: &InvisibleCostParams) -> f64 {
    if params.weight == 0.0 {
        return 0.0;
    }
    humans
        .iter()
        .map(|h| {
            let d = p.distance(h.position).max(DISTANCE_FLOOR);
            params.weight * unchecked_cost(d, dt, params)
        })
        .sum()
}
