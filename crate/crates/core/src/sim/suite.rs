//! The built-in twelve-scenario desk suite. Roads run along +x from the
//! origin with 3.5 m lanes; the ego starts at the origin in the right lane.

use super::planner::Fault;
use super::scenario::{ActorScript, Keyframe, LightPhase, LightScript, Scenario};
use crate::geom::{BicycleState, Pose2D, Vec2};
use crate::risk::{ActorClass, Environment, Extent, TrafficLight, Visibility};
use std::f64::consts::{FRAC_PI_2, PI};

const LIMIT: f64 = 13.9;
const CRUISE: f64 = 8.0;
const END: f64 = 60.0;

fn ego(v: f64) -> BicycleState {
    BicycleState::new(Pose2D::new(0.0, 0.0, 0.0), v, 2.9).expect("valid ego")
}

fn straight(len: f64) -> Vec<Vec2> {
    (0..=len as usize).map(|i| Vec2::new(i as f64, 0.0)).collect()
}

fn rect(x0: f64, x1: f64, y0: f64, y1: f64) -> Vec<Vec2> {
    vec![Vec2::new(x0, y0), Vec2::new(x1, y0), Vec2::new(x1, y1), Vec2::new(x0, y1)]
}

fn script(id: u32, class: ActorClass, frames: &[(f64, f64, f64, f64)]) -> ActorScript {
    let extent = match class {
        ActorClass::Pedestrian => Extent::PEDESTRIAN,
        _ => Extent::CAR,
    };
    ActorScript {
        id,
        class,
        extent,
        keyframes: frames.iter().map(|&(t, x, y, yaw)| Keyframe { t, pose: Pose2D::new(x, y, yaw) }).collect(),
    }
}

fn base(name: &str, len: f64, v0: f64, duration: f64, fault: Fault) -> Scenario {
    Scenario {
        name: name.to_string(),
        duration,
        tick: 0.05,
        replan_period: 0.5,
        ego: ego(v0),
        route: straight(len),
        goal_radius: 2.0,
        speed_limit: LIMIT,
        cruise_speed: CRUISE,
        actors: Vec::new(),
        light: None,
        environment: Environment::default(),
        forbidden_zones: Vec::new(),
        lane_zones: Vec::new(),
        fault,
    }
}

fn sidewalk_right(len: f64) -> Vec<Vec2> {
    rect(-10.0, len + 10.0, -9.0, -2.0)
}

fn sidewalk_left(len: f64) -> Vec<Vec2> {
    rect(-10.0, len + 10.0, 5.5, 12.0)
}

fn red_light(stop_s: f64, until: f64) -> LightScript {
    LightScript {
        stop_s,
        phases: vec![LightPhase { until, state: TrafficLight::Red }],
        zone: rect(stop_s, stop_s + 10.0, -1.75, 1.75),
    }
}

pub fn benign_cruise() -> Scenario {
    let mut s = base("benign_cruise", 60.0, 6.0, 20.0, Fault::None);
    s.forbidden_zones = vec![sidewalk_right(60.0)];
    s
}

pub fn lead_vehicle_stop() -> Scenario {
    let mut s = base("lead_vehicle_stop", 100.0, 6.0, 35.0, Fault::IgnoreActors);
    s.actors = vec![script(
        1,
        ActorClass::Vehicle,
        &[(0.0, 20.0, 0.0, 0.0), (3.0, 38.0, 0.0, 0.0), (4.0, 41.0, 0.0, 0.0), (8.0, 41.0, 0.0, 0.0), (12.0, 53.0, 0.0, 0.0), (END, 53.0 + 6.0 * (END - 12.0), 0.0, 0.0)],
    )];
    s
}

pub fn crossing_pedestrian() -> Scenario {
    let mut s = base("crossing_pedestrian", 70.0, 7.0, 30.0, Fault::IgnoreActors);
    s.actors = vec![script(
        2,
        ActorClass::Pedestrian,
        &[(0.0, 30.0, -6.0, FRAC_PI_2), (0.5, 30.0, -6.0, FRAC_PI_2), (7.5, 30.0, 6.0, FRAC_PI_2), (END, 30.0, 6.0, FRAC_PI_2)],
    )];
    s
}

pub fn red_light_stop() -> Scenario {
    let mut s = base("red_light", 70.0, 7.0, 30.0, Fault::IgnoreLights);
    s.light = Some(red_light(30.0, 9.0));
    s
}

pub fn merge_gap() -> Scenario {
    let mut s = base("merge_gap", 90.0, 8.0, 30.0, Fault::IgnoreActors);
    s.actors = vec![script(
        3,
        ActorClass::Vehicle,
        &[(0.0, 15.0, 3.5, 0.0), (1.0, 20.0, 3.5, 0.0), (3.0, 30.0, 0.0, -0.2), (3.5, 32.5, 0.0, 0.0), (END, 32.5 + 5.0 * (END - 3.5), 0.0, 0.0)],
    )];
    s
}

pub fn drift_into_sidewalk() -> Scenario {
    let mut s = base("drift_into_sidewalk", 70.0, 6.0, 25.0, Fault::LateralDrift { angle_deg: -20.0 });
    s.forbidden_zones = vec![sidewalk_right(70.0)];
    s
}

pub fn drift_into_oncoming() -> Scenario {
    let mut s = base("drift_into_oncoming", 80.0, 6.0, 25.0, Fault::LateralDrift { angle_deg: 20.0 });
    s.forbidden_zones = vec![sidewalk_left(80.0)];
    s.actors = vec![script(4, ActorClass::Vehicle, &[(0.0, 90.0, 3.5, PI), (END, 90.0 - 7.0 * END, 3.5, PI)])];
    s
}

pub fn slow_lead_overspeed() -> Scenario {
    let mut s = base("slow_lead_overspeed", 100.0, 4.0, 40.0, Fault::Overspeed { factor: 1.6 });
    s.actors = vec![script(5, ActorClass::Vehicle, &[(0.0, 25.0, 0.0, 0.0), (END, 25.0 + 4.0 * END, 0.0, 0.0)])];
    s
}

pub fn cut_in() -> Scenario {
    let mut s = base("cut_in", 90.0, 8.0, 35.0, Fault::IgnoreActors);
    s.actors = vec![script(
        6,
        ActorClass::Vehicle,
        &[(0.0, 12.0, 3.5, 0.0), (1.0, 18.0, 3.5, 0.0), (2.5, 26.0, 0.0, -0.15), (3.0, 28.5, 0.0, 0.0), (5.0, 35.0, 0.0, 0.0), (END, 35.0 + 3.0 * (END - 5.0), 0.0, 0.0)],
    )];
    s
}

pub fn stalled_vehicle() -> Scenario {
    let mut s = base("stalled_vehicle", 80.0, 6.0, 35.0, Fault::Overspeed { factor: 1.5 });
    s.actors = vec![script(
        7,
        ActorClass::Vehicle,
        &[(0.0, 35.0, 0.0, 0.0), (10.0, 35.0, 0.0, 0.0), (13.0, 44.0, 0.0, 0.0), (END, 44.0 + 6.0 * (END - 13.0), 0.0, 0.0)],
    )];
    s
}

pub fn crosswalk_red_light() -> Scenario {
    let mut s = base("crosswalk_red_light", 70.0, 7.0, 30.0, Fault::IgnoreLights);
    s.light = Some(red_light(30.0, 10.0));
    s.environment = Environment { wetness: 0.6, visibility: Visibility::Rain };
    s.actors = vec![script(
        8,
        ActorClass::Pedestrian,
        &[(0.0, 33.0, -6.0, FRAC_PI_2), (3.0, 33.0, -6.0, FRAC_PI_2), (9.0, 33.0, 6.0, FRAC_PI_2), (END, 33.0, 6.0, FRAC_PI_2)],
    )];
    s
}

/// Left-hand curve: 10 m straight, a 90 degree arc of radius 30 m, 20 m straight.
fn curve_route() -> Vec<Vec2> {
    let r = 30.0;
    let mut pts: Vec<Vec2> = (0..10).map(|i| Vec2::new(i as f64, 0.0)).collect();
    let n = (r * FRAC_PI_2).round() as usize;
    pts.extend((0..=n).map(|i| {
        let a = FRAC_PI_2 * i as f64 / n as f64;
        Vec2::new(10.0 + r * a.sin(), r * (1.0 - a.cos()))
    }));
    pts.extend((1..=20).map(|i| Vec2::new(10.0 + r, r + i as f64)));
    pts
}

fn offset_band(route: &[Vec2], near: f64, far: f64) -> Vec<Vec2> {
    let normal = |i: usize| {
        let (a, b) = if i + 1 < route.len() { (route[i], route[i + 1]) } else { (route[i - 1], route[i]) };
        (b - a).normalized().expect("distinct points").perp()
    };
    let mut inner: Vec<Vec2> = (0..route.len()).map(|i| route[i] + normal(i) * near).collect();
    let outer: Vec<Vec2> = (0..route.len()).rev().map(|i| route[i] + normal(i) * far).collect();
    inner.extend(outer);
    inner
}

pub fn curve_drift() -> Scenario {
    let mut s = base("curve_drift", 0.0, 6.0, 25.0, Fault::LateralDrift { angle_deg: -20.0 });
    s.route = curve_route();
    s.forbidden_zones = vec![offset_band(&s.route, -2.0, -9.0)];
    s
}

/// All twelve scenarios in a fixed order.
pub fn builtin_suite() -> Vec<Scenario> {
    vec![
        benign_cruise(),
        lead_vehicle_stop(),
        crossing_pedestrian(),
        red_light_stop(),
        merge_gap(),
        drift_into_sidewalk(),
        drift_into_oncoming(),
        slow_lead_overspeed(),
        cut_in(),
        stalled_vehicle(),
        crosswalk_red_light(),
        curve_drift(),
    ]
}
