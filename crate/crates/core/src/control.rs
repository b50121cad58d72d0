//! Trajectory tracking: a lateral PID on the heading error to a lookahead
//! point, a longitudinal PID on speed error and a binary brake rule.

use crate::error::{Error, Result};
use crate::geom::{BicycleState, Polyline, Pose2D, Vec2};
use crate::traj::{Pchip, PchipPath, Trajectory};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Bound on the magnitude of the accumulated integral.
    pub integral_clamp: f64,
}

impl PidGains {
    pub fn validate(&self) -> Result<()> {
        if !(self.kp >= 0.0 && self.ki >= 0.0 && self.kd >= 0.0) {
            return Err(Error::invalid(format!("pid gains must be >= 0, got {:?}", self)));
        }
        if !(self.integral_clamp > 0.0) {
            return Err(Error::invalid(format!("integral_clamp must be > 0, got {}", self.integral_clamp)));
        }
        Ok(())
    }
}

/// PID state. The derivative term is zero on the first update.
#[derive(Debug, Clone, PartialEq)]
pub struct Pid {
    gains: PidGains,
    integral: f64,
    prev: Option<f64>,
}

impl Pid {
    pub fn new(gains: PidGains) -> Result<Self> {
        gains.validate()?;
        Ok(Pid { gains, integral: 0.0, prev: None })
    }

    pub fn update(&mut self, error: f64, dt: f64) -> f64 {
        let g = self.gains;
        self.integral = (self.integral + error * dt).clamp(-g.integral_clamp, g.integral_clamp);
        let deriv = match self.prev {
            Some(p) if dt > 0.0 => (error - p) / dt,
            _ => 0.0,
        };
        self.prev = Some(error);
        g.kp * error + g.ki * self.integral + g.kd * deriv
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.prev = None;
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrakeConfig {
    pub stop_threshold: f64,
    pub ratio_limit: f64,
}

impl Default for BrakeConfig {
    fn default() -> Self {
        BrakeConfig { stop_threshold: 0.4, ratio_limit: 1.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    pub lateral: PidGains,
    pub longitudinal: PidGains,
    pub lookahead: f64,
    pub brake: BrakeConfig,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            lateral: PidGains { kp: 0.9, ki: 0.0, kd: 0.2, integral_clamp: 1.0 },
            longitudinal: PidGains { kp: 0.5, ki: 0.05, kd: 0.0, integral_clamp: 10.0 },
            lookahead: 3.0,
            brake: BrakeConfig::default(),
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<()> {
        self.lateral.validate()?;
        self.longitudinal.validate()?;
        if !(self.lookahead > 0.0) {
            return Err(Error::invalid(format!("lookahead must be > 0, got {}", self.lookahead)));
        }
        if !(self.brake.stop_threshold >= 0.0 && self.brake.ratio_limit > 1.0) {
            return Err(Error::invalid(format!("brake config out of range: {:?}", self.brake)));
        }
        Ok(())
    }
}

/// Normalized actuator command. Steering is right-positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    pub steer: f64,
    pub throttle: f64,
    pub brake: bool,
}

/// Signed heading error (left positive, radians) from the pose to the point
/// `lookahead` meters of arc past its projection, capped at the path end.
pub fn lateral_error(pose: &Pose2D, path: &Polyline, lookahead: f64) -> Result<f64> {
    if path.points().iter().all(|p| pose.to_local(*p).x <= 0.0) {
        return Err(Error::TrackingLost(format!(
            "route lies entirely behind the vehicle at ({:.2}, {:.2})",
            pose.x, pose.y
        )));
    }
    let s = (path.project(pose.position()).s + lookahead).min(path.length());
    let target = pose.to_local(path.point_at(s));
    if target.norm() < 1e-9 {
        return Ok(0.0);
    }
    Ok(target.y.atan2(target.x))
}

/// Steering command in [-1, 1], right-positive.
pub fn lateral_pid(state: &BicycleState, path: &Polyline, pid: &mut Pid, lookahead: f64, dt: f64) -> Result<f64> {
    let err = lateral_error(&state.pose, path, lookahead)?;
    Ok(pid.update(-err, dt).clamp(-1.0, 1.0))
}

/// Throttle in [0, 1].
pub fn longitudinal_pid(current: f64, desired: f64, pid: &mut Pid, dt: f64) -> f64 {
    pid.update(desired - current, dt).clamp(0.0, 1.0)
}

pub fn brake_logic(current: f64, desired: f64, cfg: &BrakeConfig) -> bool {
    desired < cfg.stop_threshold || (desired > 0.0 && current / desired > cfg.ratio_limit)
}

/// Both PID loops plus the brake rule for one vehicle.
#[derive(Debug, Clone)]
pub struct Controller {
    cfg: ControlConfig,
    lateral: Pid,
    longitudinal: Pid,
}

impl Controller {
    pub fn new(cfg: ControlConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Controller { cfg, lateral: Pid::new(cfg.lateral)?, longitudinal: Pid::new(cfg.longitudinal)? })
    }

    pub fn config(&self) -> &ControlConfig {
        &self.cfg
    }

    pub fn command(&mut self, state: &BicycleState, path: &Polyline, desired: f64, dt: f64) -> Result<ControlCommand> {
        let steer = lateral_pid(state, path, &mut self.lateral, self.cfg.lookahead, dt)?;
        let brake = brake_logic(state.speed, desired, &self.cfg.brake);
        let throttle = longitudinal_pid(state.speed, desired, &mut self.longitudinal, dt);
        if brake {
            self.longitudinal.reset();
        }
        Ok(ControlCommand { steer, throttle: if brake { 0.0 } else { throttle }, brake })
    }
}

/// Maps normalized commands onto the bicycle model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VehicleParams {
    /// Acceleration at full throttle, m/s^2.
    pub max_accel: f64,
    /// Deceleration while braking, m/s^2.
    pub max_decel: f64,
    /// Linear speed drag, 1/s.
    pub drag: f64,
    /// Front wheel angle at full steer, radians.
    pub max_steer_angle: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams { max_accel: 4.0, max_decel: 8.0, drag: 0.05, max_steer_angle: 1.22 }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_accel > 0.0 && self.max_decel > 0.0 && self.drag >= 0.0) {
            return Err(Error::invalid(format!("vehicle params out of range: {self:?}")));
        }
        if !(self.max_steer_angle > 0.0 && self.max_steer_angle < std::f64::consts::FRAC_PI_2) {
            return Err(Error::invalid(format!("max_steer_angle must be in (0, pi/2), got {}", self.max_steer_angle)));
        }
        Ok(())
    }
}

pub fn actuate(state: &BicycleState, cmd: &ControlCommand, params: &VehicleParams, dt: f64) -> BicycleState {
    let accel = if cmd.brake { -params.max_decel } else { cmd.throttle * params.max_accel } - params.drag * state.speed;
    state.step(-cmd.steer * params.max_steer_angle, accel, dt)
}

/// A trajectory prepared for tracking: a dense PCHIP route starting at the
/// planning position and a PCHIP speed profile over time since planning.
#[derive(Debug, Clone)]
pub struct PlanTrack {
    pub path: Polyline,
    speed: Pchip,
}

impl PlanTrack {
    pub fn new(t: &Trajectory) -> Result<Self> {
        let start = t.speed.points()[0];
        let mut pts: Vec<Vec2> = vec![start];
        pts.extend(t.route.points().iter().copied().filter(|p| p.distance(start) > 1e-6));
        let path = Polyline::new(PchipPath::new(&pts)?.densify(0.25))?;
        let speeds = t.speeds();
        let dt = t.speed.dt();
        let speed = if speeds.len() >= 2 {
            Pchip::new((0..speeds.len()).map(|k| (k as f64 + 0.5) * dt).collect(), speeds)?
        } else {
            Pchip::new(vec![0.0, dt], vec![speeds[0], speeds[0]])?
        };
        Ok(PlanTrack { path, speed })
    }

    /// Desired speed `elapsed` seconds after planning.
    pub fn desired_speed(&self, elapsed: f64) -> f64 {
        self.speed.eval_clamped(elapsed).max(0.0)
    }
}
