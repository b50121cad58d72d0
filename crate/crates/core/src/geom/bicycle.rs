use super::{Polyline, Pose2D};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

pub const DEFAULT_WHEELBASE: f64 = 2.9;

/// Rear-axle referenced kinematic bicycle state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BicycleState {
    pub pose: Pose2D,
    pub speed: f64,
    #[serde(default = "default_wheelbase")]
    pub wheelbase: f64,
}

fn default_wheelbase() -> f64 {
    DEFAULT_WHEELBASE
}

/// One control step: front wheel angle (left positive), acceleration, duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BicycleControl {
    pub steer: f64,
    pub accel: f64,
    pub dt: f64,
}

impl BicycleState {
    pub fn new(pose: Pose2D, speed: f64, wheelbase: f64) -> Result<Self> {
        let s = BicycleState { pose, speed, wheelbase };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.speed >= 0.0 && self.speed.is_finite()) {
            return Err(Error::invalid(format!("speed must be finite and >= 0, got {}", self.speed)));
        }
        if !(self.wheelbase > 0.0) {
            return Err(Error::invalid(format!("wheelbase must be > 0, got {}", self.wheelbase)));
        }
        Ok(())
    }

    /// Explicit Euler step. Position and yaw advance with the speed at the
    /// start of the step; speed is clamped at zero afterwards.
    pub fn step(&self, steer: f64, accel: f64, dt: f64) -> BicycleState {
        let p = self.pose;
        let v = self.speed;
        let pose = Pose2D::new(
            p.x + v * p.yaw.cos() * dt,
            p.y + v * p.yaw.sin() * dt,
            p.yaw + v * steer.tan() / self.wheelbase * dt,
        );
        BicycleState { pose, speed: (v + accel * dt).max(0.0), wheelbase: self.wheelbase }
    }
}

/// Rolls the model forward, returning the pose after every control step.
pub fn bicycle_rollout(state: &BicycleState, controls: &[BicycleControl]) -> Result<Vec<Pose2D>> {
    state.validate()?;
    let mut s = *state;
    let mut out = Vec::with_capacity(controls.len());
    for (i, c) in controls.iter().enumerate() {
        if !(c.dt > 0.0) {
            return Err(Error::invalid(format!("control {i}: dt must be > 0, got {}", c.dt)));
        }
        if !(c.steer.abs() < FRAC_PI_2) {
            return Err(Error::invalid(format!("control {i}: |steer| must be < pi/2, got {}", c.steer)));
        }
        s = s.step(c.steer, c.accel, c.dt);
        out.push(s.pose);
    }
    Ok(out)
}

/// Pure-pursuit wheel angle (left positive) toward the point `lookahead`
/// meters of arc length past the pose's projection onto `path`.
pub fn pure_pursuit_steer(pose: &Pose2D, path: &Polyline, lookahead: f64, wheelbase: f64, max_steer: f64) -> f64 {
    let s = path.project(pose.position()).s;
    let target = pose.to_local(path.point_at(s + lookahead));
    let ld = target.norm();
    if ld < 1e-9 {
        return 0.0;
    }
    let alpha = target.y.atan2(target.x);
    (2.0 * wheelbase * alpha.sin() / ld).atan().clamp(-max_steer, max_steer)
}
