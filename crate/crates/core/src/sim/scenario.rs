use crate::error::{Error, Result};
use crate::geom::{BicycleState, Polyline, Pose2D, Vec2};
use crate::risk::{Actor, ActorClass, Environment, Extent, LaneZone, SceneContext, TrafficLight};
use crate::traj::{Trajectory, SPEED_DT, SPEED_POINTS};
use serde::{Deserialize, Serialize};

use super::planner::Fault;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub t: f64,
    pub pose: Pose2D,
}

/// Pose playback for one actor: linear interpolation between keyframes,
/// held constant outside them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorScript {
    pub id: u32,
    pub class: ActorClass,
    pub extent: Extent,
    pub keyframes: Vec<Keyframe>,
}

impl ActorScript {
    pub fn pose_at(&self, t: f64) -> Pose2D {
        let k = &self.keyframes;
        let i = k.partition_point(|f| f.t <= t);
        if i == 0 {
            return k[0].pose;
        }
        if i == k.len() {
            return k[i - 1].pose;
        }
        let (a, b) = (&k[i - 1], &k[i]);
        a.pose.lerp(&b.pose, (t - a.t) / (b.t - a.t))
    }

    /// Poses from `t` onward every `dt` seconds.
    pub fn forecast(&self, t: f64, dt: f64, count: usize) -> Vec<Pose2D> {
        (0..count).map(|k| self.pose_at(t + k as f64 * dt)).collect()
    }
}

/// Signal at a stop line. The light holds `phases[i].state` until
/// `phases[i].until`, then the next phase; after the last it stays green.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightScript {
    /// Arc position of the stop line along the route.
    pub stop_s: f64,
    pub phases: Vec<LightPhase>,
    /// Area the ego must not occupy while the light is red.
    pub zone: Vec<Vec2>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightPhase {
    pub until: f64,
    pub state: TrafficLight,
}

impl LightScript {
    pub fn state_at(&self, t: f64) -> TrafficLight {
        self.phases.iter().find(|p| t < p.until).map(|p| p.state).unwrap_or(TrafficLight::Green)
    }
}

fn default_tick() -> f64 {
    0.05
}

fn default_replan() -> f64 {
    0.5
}

fn default_goal_radius() -> f64 {
    2.0
}

/// A closed-loop test drive: road, scripted world and success rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub duration: f64,
    #[serde(default = "default_tick")]
    pub tick: f64,
    #[serde(default = "default_replan")]
    pub replan_period: f64,
    pub ego: BicycleState,
    /// Lane centerline from the start to the goal.
    pub route: Vec<Vec2>,
    #[serde(default = "default_goal_radius")]
    pub goal_radius: f64,
    pub speed_limit: f64,
    pub cruise_speed: f64,
    #[serde(default)]
    pub actors: Vec<ActorScript>,
    #[serde(default)]
    pub light: Option<LightScript>,
    #[serde(default)]
    pub environment: Environment,
    #[serde(default)]
    pub forbidden_zones: Vec<Vec<Vec2>>,
    #[serde(default)]
    pub lane_zones: Vec<LaneZone>,
    /// Failure mode of the degraded planner in this scenario.
    #[serde(default)]
    pub fault: Fault,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(format!("scenario {}: {m}", self.name)));
        if !(self.tick > 0.0) {
            return bad(format!("tick must be > 0, got {}", self.tick));
        }
        if !(self.duration >= self.tick) {
            return bad(format!("duration {} shorter than one tick", self.duration));
        }
        if !(self.replan_period >= self.tick) {
            return bad(format!("replan period {} shorter than one tick", self.replan_period));
        }
        if !(self.speed_limit > 0.0 && self.cruise_speed > 0.0 && self.goal_radius > 0.0) {
            return bad("speed limit, cruise speed and goal radius must be > 0".into());
        }
        self.ego.validate()?;
        Polyline::new(self.route.clone())?;
        let mut ids = std::collections::HashSet::new();
        for a in &self.actors {
            if !ids.insert(a.id) {
                return bad(format!("duplicate actor id {}", a.id));
            }
            let k = &a.keyframes;
            if k.is_empty() || k[0].t > 0.0 || k[k.len() - 1].t < self.duration {
                return bad(format!("actor {} script does not cover [0, {}]", a.id, self.duration));
            }
            if k.windows(2).any(|w| !(w[1].t > w[0].t)) {
                return bad(format!("actor {} keyframe times must increase", a.id));
            }
        }
        if let Some(l) = &self.light {
            if l.zone.len() < 3 {
                return bad("light zone needs >= 3 vertices".into());
            }
        }
        Ok(())
    }

    pub fn reference(&self) -> Result<Polyline> {
        Polyline::new(self.route.clone())
    }

    pub fn light_state(&self, t: f64, ego_s: f64) -> TrafficLight {
        match &self.light {
            Some(l) if ego_s < l.stop_s => l.state_at(t),
            _ => TrafficLight::None,
        }
    }

    /// Analyzer view of the world at time `t` with perfect actor forecasts.
    pub fn context_at(&self, ego: &BicycleState, t: f64, expert: Option<Trajectory>) -> Result<SceneContext> {
        let s = self.reference()?.project(ego.pose.position()).s;
        let mut ctx = SceneContext::empty(*ego, self.speed_limit);
        ctx.actors = self
            .actors
            .iter()
            .map(|a| Actor { id: a.id, class: a.class, extent: a.extent, forecast: a.forecast(t, SPEED_DT, SPEED_POINTS) })
            .collect();
        ctx.traffic_light = self.light_state(t, s);
        ctx.environment = self.environment;
        ctx.forbidden_zones = self.forbidden_zones.clone();
        ctx.lane_zones = self.lane_zones.clone();
        ctx.expert = expert;
        Ok(ctx)
    }
}
