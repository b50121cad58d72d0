//! Random but self-consistent scenes for corpus synthesis and audits: a
//! single road (straight, gently curved or turning), an expert that drives it
//! without incident, and a mix of actors around it.

use crate::geom::{BicycleState, Pose2D, Vec2, DEFAULT_WHEELBASE};
use crate::risk::{
    check_collisions, Actor, ActorClass, Environment, Extent, LaneZone, SceneContext, TrafficLight, Visibility,
    ZoneKind,
};
use crate::traj::{RouteWaypoints, SpeedWaypoints, Trajectory, ROUTE_PITCH, ROUTE_POINTS, SPEED_DT, SPEED_POINTS};
use rand::Rng;
use std::f64::consts::PI;

/// Road centerline: constant curvature, parameterized by arc length `s`
/// and signed lateral offset `lat` (left positive).
#[derive(Debug, Clone, Copy)]
pub struct Road {
    pub origin: Pose2D,
    pub curvature: f64,
}

impl Road {
    pub fn point(&self, s: f64, lat: f64) -> Vec2 {
        let local = if self.curvature.abs() < 1e-9 {
            Vec2::new(s, lat)
        } else {
            let r = 1.0 / self.curvature;
            let a = s * self.curvature;
            Vec2::new((r - lat) * a.sin(), r - (r - lat) * a.cos())
        };
        self.origin.position() + local.rotate(self.origin.yaw)
    }

    pub fn heading(&self, s: f64) -> f64 {
        self.origin.yaw + s * self.curvature
    }

    pub fn pose(&self, s: f64, lat: f64, reverse: bool) -> Pose2D {
        let p = self.point(s, lat);
        Pose2D::new(p.x, p.y, self.heading(s) + if reverse { PI } else { 0.0 })
    }

    /// Route at 1 m pitch starting one meter ahead, plus speed points placed
    /// at the arc lengths reached under `speeds`.
    pub fn trajectory(&self, speeds: &[f64], lat: f64) -> Trajectory {
        let route = (1..=ROUTE_POINTS).map(|i| self.point(i as f64 * ROUTE_PITCH, lat)).collect();
        let mut s = 0.0;
        let mut pts = vec![self.point(0.0, lat)];
        for v in speeds {
            s += v * SPEED_DT;
            pts.push(self.point(s, lat));
        }
        Trajectory::new(
            RouteWaypoints::new(route).expect("distinct road points"),
            SpeedWaypoints::new(pts, SPEED_DT).expect("valid grid"),
        )
    }
}

fn moving_actor(id: u32, class: ActorClass, extent: Extent, road: &Road, s0: f64, lat: f64, v: f64) -> Actor {
    let forecast = (0..SPEED_POINTS)
        .map(|k| road.pose(s0 + v * SPEED_DT * k as f64, lat, v < 0.0))
        .collect();
    Actor { id, class, extent, forecast }
}

/// Draws one scene. The expert never collides and never exceeds the limit.
pub fn random_scene<R: Rng>(rng: &mut R) -> SceneContext {
    let origin = Pose2D::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(-PI..PI));
    let curvature = if rng.random_bool(0.25) {
        let k: f64 = rng.random_range(0.04..0.08);
        if rng.random_bool(0.5) {
            k
        } else {
            -k
        }
    } else {
        rng.random_range(-0.015..0.015)
    };
    let road = Road { origin, curvature };

    let v0: f64 = rng.random_range(2.0..10.0);
    let accel = match rng.random_range(0..4) {
        0 => rng.random_range(0.5..1.5),
        1 => -rng.random_range(0.5..1.5),
        _ => 0.0,
    };
    let speeds: Vec<f64> = (0..SPEED_POINTS - 1).map(|k| (v0 + accel * SPEED_DT * k as f64).max(0.0)).collect();
    let v_top = speeds.iter().cloned().fold(0.0, f64::max);
    let expert = road.trajectory(&speeds, 0.0);

    let ego = BicycleState::new(road.pose(0.0, 0.0, false), v0, DEFAULT_WHEELBASE).expect("valid ego");
    let speed_limit = (v_top.max(v0) / 0.9) * rng.random_range(1.15..1.8);
    let mut ctx = SceneContext::empty(ego, speed_limit).with_expert(expert);
    ctx.lane_zones = ZoneKind::ALL.iter().map(|k| LaneZone { kind: *k, offset: k.default_offset() }).collect();

    let mut id = 1;
    let mut candidates = Vec::new();
    if rng.random_bool(0.5) {
        let s0 = rng.random_range(15.0..35.0);
        let v = v_top + rng.random_range(0.0..2.0);
        candidates.push(moving_actor(id, ActorClass::Vehicle, Extent::CAR, &road, s0, 0.0, v));
        id += 1;
    }
    if rng.random_bool(0.5) {
        let class = if rng.random_bool(0.5) { ActorClass::Static } else { ActorClass::Vehicle };
        let s0 = rng.random_range(8.0..35.0);
        candidates.push(moving_actor(id, class, Extent::CAR, &road, s0, ZoneKind::Parking.default_offset(), 0.0));
        id += 1;
    }
    for _ in 0..rng.random_range(0..4) {
        let s0 = rng.random_range(10.0..60.0);
        let v = -rng.random_range(3.0..10.0);
        candidates.push(moving_actor(id, ActorClass::Vehicle, Extent::CAR, &road, s0, 3.5, v));
        id += 1;
    }
    for _ in 0..rng.random_range(0..4) {
        let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let lat = side * rng.random_range(5.0..7.0);
        let s0 = rng.random_range(-5.0..30.0);
        let v = rng.random_range(-1.5..1.5);
        candidates.push(moving_actor(id, ActorClass::Pedestrian, Extent::PEDESTRIAN, &road, s0, lat, v));
        id += 1;
    }
    for _ in 0..rng.random_range(0..5) {
        let s0 = rng.random_range(-45.0..-15.0);
        let v = rng.random_range(0.0..v0.max(0.5));
        candidates.push(moving_actor(id, ActorClass::Vehicle, Extent::CAR, &road, s0, 0.0, v));
        id += 1;
    }
    for a in candidates {
        let mut probe = ctx.clone();
        probe.actors = vec![a.clone()];
        let clear = check_collisions(probe.expert().expect("expert set"), &probe).map(|c| c.is_none()).unwrap_or(false);
        if clear {
            ctx.actors.push(a);
        }
    }

    ctx.traffic_light = match rng.random_range(0..8) {
        0..=3 => TrafficLight::None,
        4 | 5 => TrafficLight::Green,
        6 => TrafficLight::Red,
        _ => TrafficLight::Yellow,
    };
    ctx.stop_sign_active = rng.random_bool(0.07);
    ctx.environment = Environment {
        wetness: if rng.random_bool(0.3) { rng.random_range(0.0..0.9) } else { 0.0 },
        visibility: match rng.random_range(0..10) {
            0 => Visibility::Rain,
            1 => Visibility::Fog,
            2 => Visibility::Night,
            _ => Visibility::Clear,
        },
    };
    ctx
}
