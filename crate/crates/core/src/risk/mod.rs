//! Four-domain risk analysis producing the six risk flags.

mod collision;
mod context;
mod lateral;
mod longitudinal;
mod scene;

pub use collision::{check_collisions, ego_rollout, CollisionEvidence, ROLLOUT_LOOKAHEAD, ROLLOUT_SUBSTEPS};
pub use context::{analyze_context, ContextEvidence};
pub use lateral::{analyze_lateral, classify_topology, LateralEvidence, Side, Topology, TopologyEvidence};
pub use longitudinal::{analyze_longitudinal, classify_intent, LongitudinalEvidence, MotionIntent};
pub use scene::{
    Actor, ActorClass, Environment, Extent, LaneZone, SceneContext, TrafficLight, Visibility, ZoneKind,
};

use crate::error::{Error, Result};
use crate::traj::Trajectory;
use serde::{Deserialize, Serialize};

/// Decision thresholds. The first block mirrors the published rule set; the
/// remainder fixes the classifier details that the rules leave open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiskThresholds {
    /// Heading deviation threshold, degrees.
    pub tau_theta: f64,
    /// Cross-track error threshold, meters.
    pub tau_lat: f64,
    pub speed_limit_margin: f64,
    pub tau_rel: f64,
    /// m/s
    pub tau_abs: f64,
    pub complex_actor_count: usize,
    /// meters
    pub vru_radius: f64,
    pub wetness_threshold: f64,
    /// Cumulative heading change that counts as a turn, degrees.
    pub turn_angle: f64,
    /// Net lateral displacement that counts as a lane change, meters.
    pub lane_change_offset: f64,
    /// m/s^2
    pub intent_accel: f64,
    /// m/s
    pub stop_speed: f64,
}

impl Default for RiskThresholds {
    fn default() -> Self {
        RiskThresholds {
            tau_theta: 7.5,
            tau_lat: 2.0,
            speed_limit_margin: 0.9,
            tau_rel: 0.20,
            tau_abs: 0.5,
            complex_actor_count: 6,
            vru_radius: 10.0,
            wetness_threshold: 0.40,
            turn_angle: 30.0,
            lane_change_offset: 2.5,
            intent_accel: 0.2,
            stop_speed: 0.5,
        }
    }
}

impl RiskThresholds {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tau_theta", self.tau_theta),
            ("tau_lat", self.tau_lat),
            ("tau_abs", self.tau_abs),
            ("vru_radius", self.vru_radius),
            ("turn_angle", self.turn_angle),
            ("lane_change_offset", self.lane_change_offset),
            ("intent_accel", self.intent_accel),
            ("stop_speed", self.stop_speed),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("threshold {name} must be > 0, got {v}")));
            }
        }
        let unit = [
            ("tau_rel", self.tau_rel),
            ("speed_limit_margin", self.speed_limit_margin),
            ("wetness_threshold", self.wetness_threshold),
        ];
        for (name, v) in unit {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(format!("threshold {name} must lie in (0, 1), got {v}")));
            }
        }
        if self.complex_actor_count == 0 {
            return Err(Error::invalid("threshold complex_actor_count must be > 0"));
        }
        Ok(())
    }
}

/// The six reported risk categories in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskKind {
    Collision,
    Speed,
    Direction,
    Pedestrian,
    StopSign,
    TrafficLight,
}

impl RiskKind {
    pub const ALL: [RiskKind; 6] = [
        RiskKind::Collision,
        RiskKind::Speed,
        RiskKind::Direction,
        RiskKind::Pedestrian,
        RiskKind::StopSign,
        RiskKind::TrafficLight,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RiskKind::Collision => "Collision",
            RiskKind::Speed => "Speed",
            RiskKind::Direction => "Direction",
            RiskKind::Pedestrian => "Pedestrian",
            RiskKind::StopSign => "Stop Sign",
            RiskKind::TrafficLight => "Traffic Light",
        }
    }

    /// Flags that depend only on the scene, never on the trajectory.
    pub fn is_contextual(self) -> bool {
        matches!(self, RiskKind::Pedestrian | RiskKind::StopSign | RiskKind::TrafficLight)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub collision: bool,
    pub speed: bool,
    pub direction: bool,
    pub pedestrian: bool,
    pub stop_sign: bool,
    pub traffic_light: bool,
    pub lateral: LateralEvidence,
    pub longitudinal: LongitudinalEvidence,
    pub collision_evidence: Option<CollisionEvidence>,
    pub context: ContextEvidence,
}

impl RiskReport {
    pub fn flag(&self, kind: RiskKind) -> bool {
        match kind {
            RiskKind::Collision => self.collision,
            RiskKind::Speed => self.speed,
            RiskKind::Direction => self.direction,
            RiskKind::Pedestrian => self.pedestrian,
            RiskKind::StopSign => self.stop_sign,
            RiskKind::TrafficLight => self.traffic_light,
        }
    }

    pub fn flags(&self) -> [bool; 6] {
        RiskKind::ALL.map(|k| self.flag(k))
    }

    pub fn count(&self) -> usize {
        self.flags().iter().filter(|f| **f).count()
    }

    pub fn any(&self) -> bool {
        self.count() > 0
    }

    /// Number of raised flags that no trajectory could clear.
    pub fn contextual_count(&self) -> usize {
        RiskKind::ALL.iter().filter(|k| k.is_contextual() && self.flag(**k)).count()
    }

    /// Recomputes all six flags from the stored evidence alone.
    pub fn rethreshold(&self, th: &RiskThresholds) -> [bool; 6] {
        [
            self.collision_evidence.is_some(),
            self.longitudinal.decide(th),
            self.lateral.decide(th),
            self.context.pedestrian_flag(th),
            self.context.stop_sign_active,
            self.context.red_light,
        ]
    }
}

fn tag<T>(analyzer: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Analyzer { analyzer, source: Box::new(e) })
}

/// Runs every analyzer and folds the results into one report.
pub fn aggregate(pred: &Trajectory, ctx: &SceneContext, th: &RiskThresholds) -> Result<RiskReport> {
    let (direction, lateral) = tag("lateral", analyze_lateral(pred, ctx, th))?;
    let (speed, longitudinal) = tag("longitudinal", analyze_longitudinal(pred, ctx, th))?;
    let collision_evidence = tag("collision", check_collisions(pred, ctx))?;
    let context = tag("context", Ok(analyze_context(ctx, pred, th)))?;
    Ok(RiskReport {
        collision: collision_evidence.is_some(),
        speed,
        direction,
        pedestrian: context.pedestrian_flag(th),
        stop_sign: context.stop_sign_active,
        traffic_light: context.red_light,
        lateral,
        longitudinal,
        collision_evidence,
        context,
    })
}
