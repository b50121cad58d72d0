use crate::error::{Error, Result};
use crate::geom::{BicycleState, Obb, Pose2D, Vec2};
use crate::traj::{Trajectory, SPEED_DT};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActorClass {
    Vehicle,
    Pedestrian,
    Static,
}

impl ActorClass {
    pub fn is_dynamic(self) -> bool {
        !matches!(self, ActorClass::Static)
    }

    pub fn name(self) -> &'static str {
        match self {
            ActorClass::Vehicle => "vehicle",
            ActorClass::Pedestrian => "pedestrian",
            ActorClass::Static => "static",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "vehicle" => Some(ActorClass::Vehicle),
            "pedestrian" => Some(ActorClass::Pedestrian),
            "static" => Some(ActorClass::Static),
            _ => None,
        }
    }
}

impl fmt::Display for ActorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_actor_z_max() -> f64 {
    1.8
}

/// Box half extents plus vertical interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extent {
    pub half_length: f64,
    pub half_width: f64,
    #[serde(default)]
    pub z_min: f64,
    #[serde(default = "default_actor_z_max")]
    pub z_max: f64,
}

impl Extent {
    pub const EGO: Extent = Extent { half_length: 2.45, half_width: 1.0, z_min: 0.0, z_max: 1.5 };
    pub const CAR: Extent = Extent { half_length: 2.3, half_width: 0.95, z_min: 0.0, z_max: 1.8 };
    pub const PEDESTRIAN: Extent = Extent { half_length: 0.35, half_width: 0.35, z_min: 0.0, z_max: 1.8 };

    pub fn obb(&self, pose: Pose2D) -> Result<Obb> {
        Obb::new(pose, self.half_length, self.half_width, self.z_min, self.z_max)
    }

    pub fn half_diagonal(&self) -> f64 {
        self.half_length.hypot(self.half_width)
    }
}

/// A scripted participant with poses on the scene's forecast grid
/// (`forecast[k]` is the pose at `t = k * forecast_dt`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Actor {
    pub id: u32,
    pub class: ActorClass,
    pub extent: Extent,
    pub forecast: Vec<Pose2D>,
}

impl Actor {
    pub fn position(&self) -> Vec2 {
        self.forecast[0].position()
    }

    pub fn obb_at(&self, k: usize) -> Result<Obb> {
        let pose = self.forecast.get(k).ok_or_else(|| {
            Error::invalid(format!("actor {} forecast has {} poses, step {k} requested", self.id, self.forecast.len()))
        })?;
        self.extent.obb(*pose)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrafficLight {
    #[default]
    None,
    Red,
    Yellow,
    Green,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    #[default]
    Clear,
    Rain,
    Fog,
    Night,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Environment {
    /// Road wetness as a fraction in [0, 1].
    #[serde(default)]
    pub wetness: f64,
    #[serde(default)]
    pub visibility: Visibility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneKind {
    SameDirection,
    Opposite,
    Parking,
    Sidewalk,
}

impl ZoneKind {
    pub const ALL: [ZoneKind; 4] = [ZoneKind::SameDirection, ZoneKind::Opposite, ZoneKind::Parking, ZoneKind::Sidewalk];

    /// Lateral offset used when the scene does not list the zone; left positive.
    pub fn default_offset(self) -> f64 {
        match self {
            ZoneKind::SameDirection => -3.5,
            ZoneKind::Opposite => 3.5,
            ZoneKind::Parking => -3.0,
            ZoneKind::Sidewalk => -5.0,
        }
    }
}

/// Adjacent zone reachable by a lateral shift of `offset` meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneZone {
    pub kind: ZoneKind,
    pub offset: f64,
}

fn default_forecast_dt() -> f64 {
    SPEED_DT
}

fn default_ego_extent() -> Extent {
    Extent::EGO
}

/// Everything the analyzers know about the moment being judged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneContext {
    pub ego: BicycleState,
    #[serde(default = "default_ego_extent")]
    pub ego_extent: Extent,
    #[serde(default)]
    pub actors: Vec<Actor>,
    #[serde(default = "default_forecast_dt")]
    pub forecast_dt: f64,
    pub speed_limit: f64,
    #[serde(default)]
    pub traffic_light: TrafficLight,
    #[serde(default)]
    pub stop_sign_active: bool,
    #[serde(default)]
    pub environment: Environment,
    #[serde(default)]
    pub expert: Option<Trajectory>,
    #[serde(default)]
    pub forbidden_zones: Vec<Vec<Vec2>>,
    #[serde(default)]
    pub lane_zones: Vec<LaneZone>,
}

impl SceneContext {
    /// A scene with no actors, no controls and clear weather.
    pub fn empty(ego: BicycleState, speed_limit: f64) -> Self {
        SceneContext {
            ego,
            ego_extent: Extent::EGO,
            actors: Vec::new(),
            forecast_dt: SPEED_DT,
            speed_limit,
            traffic_light: TrafficLight::None,
            stop_sign_active: false,
            environment: Environment::default(),
            expert: None,
            forbidden_zones: Vec::new(),
            lane_zones: Vec::new(),
        }
    }

    pub fn with_expert(mut self, expert: Trajectory) -> Self {
        self.expert = Some(expert);
        self
    }

    pub fn expert(&self) -> Result<&Trajectory> {
        self.expert.as_ref().ok_or_else(|| Error::invalid("scene has no expert reference trajectory"))
    }

    pub fn actor(&self, id: u32) -> Option<&Actor> {
        self.actors.iter().find(|a| a.id == id)
    }

    pub fn zone_offset(&self, kind: ZoneKind) -> f64 {
        self.lane_zones.iter().find(|z| z.kind == kind).map(|z| z.offset).unwrap_or(kind.default_offset())
    }

    pub fn validate(&self) -> Result<()> {
        self.ego.validate()?;
        self.ego_extent.obb(self.ego.pose)?;
        if !(self.speed_limit > 0.0 && self.speed_limit.is_finite()) {
            return Err(Error::invalid(format!("speed_limit must be > 0, got {}", self.speed_limit)));
        }
        if !(self.forecast_dt > 0.0) {
            return Err(Error::invalid(format!("forecast_dt must be > 0, got {}", self.forecast_dt)));
        }
        if !(0.0..=1.0).contains(&self.environment.wetness) {
            return Err(Error::invalid(format!("wetness must lie in [0, 1], got {}", self.environment.wetness)));
        }
        let mut ids = std::collections::HashSet::new();
        for a in &self.actors {
            if !ids.insert(a.id) {
                return Err(Error::invalid(format!("duplicate actor id {}", a.id)));
            }
            if a.forecast.is_empty() {
                return Err(Error::invalid(format!("actor {} has an empty forecast", a.id)));
            }
            a.obb_at(0)?;
        }
        for (i, z) in self.forbidden_zones.iter().enumerate() {
            if z.len() < 3 {
                return Err(Error::invalid(format!("forbidden zone {i} needs >= 3 vertices")));
            }
        }
        Ok(())
    }
}
