use super::{ActorClass, RiskThresholds, SceneContext, TrafficLight, Visibility};
use crate::geom::point_in_polygon;
use crate::traj::Trajectory;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextEvidence {
    /// Closest pedestrian as (actor id, distance from ego in meters).
    pub nearest_pedestrian: Option<(u32, f64)>,
    pub dynamic_actors: usize,
    pub complex: bool,
    pub visibility: Visibility,
    pub wetness: f64,
    pub adverse: bool,
    pub stop_sign_active: bool,
    pub red_light: bool,
    /// First route point inside a forbidden zone, as (zone index, point index).
    pub forbidden_entry: Option<(usize, usize)>,
}

impl ContextEvidence {
    pub fn pedestrian_flag(&self, th: &RiskThresholds) -> bool {
        self.nearest_pedestrian.is_some_and(|(_, d)| d < th.vru_radius)
    }
}

pub fn analyze_context(ctx: &SceneContext, pred: &Trajectory, th: &RiskThresholds) -> ContextEvidence {
    let ego = ctx.ego.pose.position();
    let nearest_pedestrian = ctx
        .actors
        .iter()
        .filter(|a| a.class == ActorClass::Pedestrian)
        .map(|a| (a.id, a.position().distance(ego)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    let dynamic_actors = ctx.actors.iter().filter(|a| a.class.is_dynamic()).count();
    let env = ctx.environment;
    let forbidden_entry = ctx.forbidden_zones.iter().enumerate().find_map(|(zi, zone)| {
        pred.route.points().iter().position(|p| point_in_polygon(*p, zone)).map(|pi| (zi, pi))
    });
    ContextEvidence {
        nearest_pedestrian,
        dynamic_actors,
        complex: dynamic_actors > th.complex_actor_count,
        visibility: env.visibility,
        wetness: env.wetness,
        adverse: env.visibility != Visibility::Clear || env.wetness > th.wetness_threshold,
        stop_sign_active: ctx.stop_sign_active,
        red_light: ctx.traffic_light == TrafficLight::Red,
        forbidden_entry,
    }
}
