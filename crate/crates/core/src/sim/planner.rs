use super::scenario::Scenario;
use crate::error::{Error, Result};
use crate::geom::{BicycleState, Polyline, Vec2};
use crate::perturb::gaussian_noise;
use crate::risk::TrafficLight;
use crate::traj::{RouteWaypoints, SpeedWaypoints, Trajectory, ROUTE_PITCH, ROUTE_POINTS, SPEED_DT, SPEED_POINTS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Produces a plan from the ego state at a planning instant.
pub trait Planner: Sync {
    fn plan(&self, sc: &Scenario, ego: &BicycleState, t: f64, plan_index: usize) -> Result<Trajectory>;
    fn id(&self) -> String;
}

/// Systematic planner defects used to build a deliberately weak planner.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Fault {
    #[default]
    None,
    /// Never slows for actors.
    IgnoreActors,
    /// Never stops at the signal.
    IgnoreLights,
    /// Plan rotated about the ego by a fixed angle (degrees, left positive).
    LateralDrift { angle_deg: f64 },
    /// Targets `factor` times the cruise speed and ignores every stop.
    Overspeed { factor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpertParams {
    pub accel: f64,
    /// Deceleration used to shape stopping profiles.
    pub decel: f64,
    /// Distance over which a lateral offset is removed.
    pub converge: f64,
    /// Clearance kept to a stopped obstacle.
    pub gap: f64,
    /// How far ahead in time actor scripts are scanned.
    pub look_time: f64,
    pub corridor_margin: f64,
    /// Cruise speed never exceeds this share of the limit.
    pub limit_share: f64,
}

impl Default for ExpertParams {
    fn default() -> Self {
        ExpertParams { accel: 2.0, decel: 3.0, converge: 8.0, gap: 2.5, look_time: 3.0, corridor_margin: 0.4, limit_share: 0.7 }
    }
}

/// Rule-based lane follower with stop handling; optionally applies the
/// scenario's fault.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpertPlanner {
    pub params: ExpertParams,
    pub faulty: bool,
}

impl ExpertPlanner {
    pub fn clean() -> Self {
        ExpertPlanner { params: ExpertParams::default(), faulty: false }
    }

    pub fn degraded() -> Self {
        ExpertPlanner { params: ExpertParams::default(), faulty: true }
    }

    fn smoothstep(x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        x * x * (3.0 - 2.0 * x)
    }

    /// Free distance along the route before the ego must have stopped.
    fn stop_distance(&self, sc: &Scenario, reference: &Polyline, s0: f64, t: f64, fault: Fault) -> f64 {
        let p = &self.params;
        let front = crate::risk::Extent::EGO.half_length;
        let mut d = f64::INFINITY;
        if !matches!(fault, Fault::IgnoreLights) {
            if let Some(l) = &sc.light {
                if s0 < l.stop_s && matches!(l.state_at(t), TrafficLight::Red | TrafficLight::Yellow) {
                    d = d.min(l.stop_s - s0 - front - 0.5);
                }
            }
        }
        if matches!(fault, Fault::IgnoreActors) {
            return d;
        }
        let ego_half_width = crate::risk::Extent::EGO.half_width;
        let steps = (p.look_time / SPEED_DT).round() as usize;
        for a in &sc.actors {
            for k in 0..=steps {
                let pose = a.pose_at(t + k as f64 * SPEED_DT);
                let pr = reference.project(pose.position());
                if pr.s <= s0 {
                    continue;
                }
                let rel = pose.yaw - reference.tangent_at(pr.s).angle();
                let (sin, cos) = (rel.sin().abs(), rel.cos().abs());
                let across = a.extent.half_length * sin + a.extent.half_width * cos;
                let along = a.extent.half_length * cos + a.extent.half_width * sin;
                if pr.lateral.abs() < ego_half_width + across + p.corridor_margin {
                    d = d.min(pr.s - s0 - front - along - p.gap);
                }
            }
        }
        d
    }
}

impl Planner for ExpertPlanner {
    fn plan(&self, sc: &Scenario, ego: &BicycleState, t: f64, _plan_index: usize) -> Result<Trajectory> {
        let p = &self.params;
        let fault = if self.faulty { sc.fault } else { Fault::None };
        let reference = sc.reference()?;
        let origin = ego.pose.position();
        let (s0, d0) = locate(&reference, origin);
        let route: Vec<Vec2> = (1..=ROUTE_POINTS)
            .map(|i| {
                let ds = i as f64 * ROUTE_PITCH;
                let s = s0 + ds;
                let lat = d0 * (1.0 - Self::smoothstep(ds / p.converge));
                extend(&reference, s) + reference.tangent_at(s).perp() * lat
            })
            .collect();
        let cruise = sc.cruise_speed.min(p.limit_share * sc.speed_limit);
        let mut speeds = Vec::with_capacity(SPEED_POINTS - 1);
        let mut travelled = 0.0;
        match fault {
            Fault::Overspeed { factor } => {
                for k in 0..SPEED_POINTS - 1 {
                    speeds.push((factor * cruise).min(ego.speed + p.accel * (k + 1) as f64 * SPEED_DT));
                }
            }
            _ => {
                let stop = self.stop_distance(sc, &reference, s0, t, fault);
                for k in 0..SPEED_POINTS - 1 {
                    let v = cruise
                        .min(ego.speed + p.accel * (k + 1) as f64 * SPEED_DT)
                        .min((2.0 * p.decel * (stop - travelled).max(0.0)).sqrt());
                    travelled += v * SPEED_DT;
                    speeds.push(v);
                }
            }
        }
        let mut path_pts = vec![origin];
        path_pts.extend(route.iter().copied().filter(|q| q.distance(origin) > 1e-9));
        let speed = SpeedWaypoints::along(&Polyline::new(path_pts)?, 0.0, &speeds, SPEED_DT)?;
        let mut plan = Trajectory::new(RouteWaypoints::new(route)?, speed);
        if let Fault::LateralDrift { angle_deg } = fault {
            plan = rotate_about(&plan, origin, angle_deg.to_radians())?;
        }
        Ok(plan)
    }

    fn id(&self) -> String {
        if self.faulty { "expert+fault" } else { "expert" }.to_string()
    }
}

/// Arc position and signed lateral offset, measured against the straight
/// continuation once the ego is past the route end.
fn locate(reference: &Polyline, p: Vec2) -> (f64, f64) {
    let pr = reference.project(p);
    let len = reference.length();
    let tangent = reference.tangent_at(len);
    let past = (p - reference.point_at(len)).dot(tangent);
    if pr.s >= len && past > 0.0 {
        (len + past, tangent.cross(p - reference.point_at(len)))
    } else {
        (pr.s, pr.lateral)
    }
}

/// Point at arc length `s`, continuing straight past the route end.
fn extend(reference: &Polyline, s: f64) -> Vec2 {
    let len = reference.length();
    if s <= len {
        reference.point_at(s)
    } else {
        reference.point_at(len) + reference.tangent_at(len) * (s - len)
    }
}

fn rotate_about(t: &Trajectory, c: Vec2, angle: f64) -> Result<Trajectory> {
    let r = |p: &Vec2| c + (*p - c).rotate(angle);
    Ok(Trajectory::new(
        RouteWaypoints::new(t.route.points().iter().map(r).collect())?,
        SpeedWaypoints::new(t.speed.points().iter().map(r).collect(), t.speed.dt())?,
    ))
}

/// Wraps a planner and adds independent Gaussian noise of standard
/// deviation `sigma` to every waypoint coordinate.
#[derive(Debug, Clone)]
pub struct NoisyPlanner<P> {
    pub inner: P,
    pub sigma: f64,
    pub seed: u64,
}

/// Stable 64-bit FNV-1a hash, used to give each scenario its own stream.
pub fn name_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

pub fn degrade_planner<P: Planner>(inner: P, sigma: f64, seed: u64) -> Result<NoisyPlanner<P>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("noise sigma must be >= 0, got {sigma}")));
    }
    Ok(NoisyPlanner { inner, sigma, seed })
}

impl<P: Planner> Planner for NoisyPlanner<P> {
    fn plan(&self, sc: &Scenario, ego: &BicycleState, t: f64, plan_index: usize) -> Result<Trajectory> {
        let plan = self.inner.plan(sc, ego, t, plan_index)?;
        if self.sigma == 0.0 {
            return Ok(plan);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ name_hash(&sc.name));
        rng.set_stream(plan_index as u64);
        gaussian_noise(&plan, self.sigma, &mut rng)
    }

    fn id(&self) -> String {
        format!("{}+noise({})", self.inner.id(), self.sigma)
    }
}
