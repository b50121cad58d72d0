//! Synthetic corruption of expert trajectories: speed scaling, forced lane
//! deviation and forced collision, plus batch synthesis with a kind mix.

mod ops;
pub mod scenegen;

pub use ops::{
    collision_speed, feasibility, forced_collision, lane_deviation, scale_speed, shifted_route, CollisionTarget,
    Feasibility, DEFAULT_V_MAX,
};

use crate::critique::{critique, Critique};
use crate::error::{Error, Result};
use crate::risk::{aggregate, RiskThresholds, SceneContext, ZoneKind};
use crate::geom::Vec2;
use crate::traj::{RouteWaypoints, SpeedWaypoints, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    IncreaseSpeed,
    ReduceSpeed,
    LaneChange,
    Collision,
}

impl PerturbationKind {
    pub const ALL: [PerturbationKind; 4] = [
        PerturbationKind::IncreaseSpeed,
        PerturbationKind::ReduceSpeed,
        PerturbationKind::LaneChange,
        PerturbationKind::Collision,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PerturbationKind::IncreaseSpeed => "increase_speed",
            PerturbationKind::ReduceSpeed => "reduce_speed",
            PerturbationKind::LaneChange => "lane_change",
            PerturbationKind::Collision => "collision",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// Probabilities of each perturbation kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationMix {
    pub increase_speed: f64,
    pub reduce_speed: f64,
    pub lane_change: f64,
    pub collision: f64,
}

impl Default for PerturbationMix {
    /// Published composition of the augmented subset.
    fn default() -> Self {
        PerturbationMix { increase_speed: 0.3688, reduce_speed: 0.3718, lane_change: 0.0946, collision: 0.1648 }
    }
}

impl PerturbationMix {
    pub fn only(kind: PerturbationKind) -> Self {
        let mut m = PerturbationMix { increase_speed: 0.0, reduce_speed: 0.0, lane_change: 0.0, collision: 0.0 };
        *m.weight_mut(kind) = 1.0;
        m
    }

    pub fn weight(&self, kind: PerturbationKind) -> f64 {
        match kind {
            PerturbationKind::IncreaseSpeed => self.increase_speed,
            PerturbationKind::ReduceSpeed => self.reduce_speed,
            PerturbationKind::LaneChange => self.lane_change,
            PerturbationKind::Collision => self.collision,
        }
    }

    fn weight_mut(&mut self, kind: PerturbationKind) -> &mut f64 {
        match kind {
            PerturbationKind::IncreaseSpeed => &mut self.increase_speed,
            PerturbationKind::ReduceSpeed => &mut self.reduce_speed,
            PerturbationKind::LaneChange => &mut self.lane_change,
            PerturbationKind::Collision => &mut self.collision,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ws = PerturbationKind::ALL.map(|k| self.weight(k));
        if ws.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::invalid(format!("mix weights must be >= 0, got {ws:?}")));
        }
        let total: f64 = ws.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("mix weights must sum to 1, got {total}")));
        }
        Ok(())
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> PerturbationKind {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for k in PerturbationKind::ALL {
            acc += self.weight(k);
            if u < acc {
                return k;
            }
        }
        *PerturbationKind::ALL.iter().rev().find(|k| self.weight(**k) > 0.0).expect("validated mix")
    }
}

/// Fully specified perturbation, enough to replay it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PerturbationSpec {
    SpeedScale { gamma: f64 },
    LaneDeviation { zone: ZoneKind, offset: f64, k_start: usize, l_trans: usize },
    ForcedCollision(CollisionTarget),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    pub mix: PerturbationMix,
    pub samples_per_scene: usize,
    pub max_attempts: usize,
    /// meters
    pub max_tracking_error: f64,
    /// m/s^2
    pub max_lateral_accel: f64,
    /// m/s
    pub v_max: f64,
    /// Half-angle of the forward field of view for collision targets, degrees.
    pub fov_deg: f64,
    /// Safety distance for forced collisions; the ego half length when unset.
    pub delta_safety: Option<f64>,
    /// Extra clearance a collision target must have beyond the safety distance, meters.
    pub min_target_gap: f64,
    pub thresholds: RiskThresholds,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            mix: PerturbationMix::default(),
            samples_per_scene: 4,
            max_attempts: 20,
            max_tracking_error: 0.5,
            max_lateral_accel: 8.0,
            v_max: DEFAULT_V_MAX,
            fov_deg: 30.0,
            delta_safety: None,
            min_target_gap: 2.0,
            thresholds: RiskThresholds::default(),
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        self.mix.validate()?;
        self.thresholds.validate()?;
        if self.max_attempts == 0 {
            return Err(Error::invalid("max_attempts must be >= 1"));
        }
        if !(self.max_tracking_error > 0.0 && self.max_lateral_accel > 0.0 && self.v_max > 0.0 && self.fov_deg > 0.0) {
            return Err(Error::invalid("feasibility limits, v_max and fov must be > 0"));
        }
        Ok(())
    }

    fn delta(&self, ctx: &SceneContext) -> f64 {
        self.delta_safety.unwrap_or(ctx.ego_extent.half_length)
    }
}

/// Draws concrete parameters for a perturbation of `kind`.
pub fn draw_spec<R: Rng>(
    kind: PerturbationKind,
    t: &Trajectory,
    ctx: &SceneContext,
    cfg: &SynthesisConfig,
    rng: &mut R,
) -> Result<PerturbationSpec> {
    match kind {
        PerturbationKind::IncreaseSpeed => Ok(PerturbationSpec::SpeedScale { gamma: rng.random_range(1.1..1.5) }),
        PerturbationKind::ReduceSpeed => Ok(PerturbationSpec::SpeedScale { gamma: rng.random_range(0.3..0.9) }),
        PerturbationKind::LaneChange => {
            let zone = ZoneKind::ALL[rng.random_range(0..ZoneKind::ALL.len())];
            let n = t.route.len();
            let l_trans = rng.random_range(8..=12).min(n.saturating_sub(1)).max(1);
            let k_start = rng.random_range(0..=6usize.min(n - l_trans));
            Ok(PerturbationSpec::LaneDeviation { zone, offset: ctx.zone_offset(zone), k_start, l_trans })
        }
        PerturbationKind::Collision => {
            let n = t.speed.len();
            if n < 3 {
                return Err(Error::Infeasible("horizon too short for a collision".into()));
            }
            let k = rng.random_range(2..n);
            let delta = cfg.delta(ctx);
            let ego = ctx.ego.pose;
            let fov = cfg.fov_deg.to_radians();
            let ids: Vec<u32> = ctx
                .actors
                .iter()
                .filter(|a| {
                    a.forecast.get(k).is_some_and(|p| {
                        let rel = ego.to_local(p.position());
                        rel.norm() >= delta + cfg.min_target_gap && rel.y.atan2(rel.x).abs() <= fov
                    })
                })
                .map(|a| a.id)
                .collect();
            if ids.is_empty() {
                return Err(Error::Infeasible(format!("no collision candidate in view at step {k}")));
            }
            let actor_id = ids[rng.random_range(0..ids.len())];
            Ok(PerturbationSpec::ForcedCollision(CollisionTarget {
                actor_id,
                t_crash: k as f64 * t.speed.dt(),
                delta_safety: delta,
            }))
        }
    }
}

pub fn apply(spec: &PerturbationSpec, t: &Trajectory, ctx: &SceneContext, cfg: &SynthesisConfig) -> Result<Trajectory> {
    match spec {
        PerturbationSpec::SpeedScale { gamma } => scale_speed(t, *gamma),
        PerturbationSpec::LaneDeviation { offset, k_start, l_trans, .. } => lane_deviation(t, *offset, *k_start, *l_trans),
        PerturbationSpec::ForcedCollision(target) => forced_collision(t, ctx, target, cfg.v_max),
    }
}

/// One synthesized training example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub scene: usize,
    pub kind: PerturbationKind,
    pub spec: PerturbationSpec,
    pub seed: u64,
    pub rough: Trajectory,
    pub critique: Critique,
    /// Unperturbed expert, the refinement target.
    pub target: Trajectory,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SynthesisStats {
    pub requested: usize,
    pub emitted: usize,
    pub attempts: usize,
    pub emitted_per_kind: BTreeMap<String, usize>,
    pub skipped_per_kind: BTreeMap<String, usize>,
    /// Last rejection reason per skipped draw, grouped by kind.
    pub skip_reasons: BTreeMap<String, Vec<String>>,
}

/// Copy of `t` with i.i.d. Gaussian noise of standard deviation `sigma` on
/// every waypoint coordinate.
pub fn gaussian_noise<R: Rng>(t: &Trajectory, sigma: f64, rng: &mut R) -> Result<Trajectory> {
    let mut jitter = |pts: &[Vec2]| -> Vec<Vec2> {
        pts.iter()
            .map(|p| {
                let dx: f64 = StandardNormal.sample(rng);
                let dy: f64 = StandardNormal.sample(rng);
                *p + Vec2::new(dx, dy) * sigma
            })
            .collect()
    };
    let route = jitter(t.route.points());
    let speed = jitter(t.speed.points());
    Ok(Trajectory::new(RouteWaypoints::new(route)?, SpeedWaypoints::new(speed, t.speed.dt())?))
}

/// Per-scene random stream, independent of evaluation order.
pub fn scene_rng(seed: u64, scene: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(scene as u64);
    rng
}

/// A sample with its attempt count, or the attempts spent and the last rejection.
type Draw = std::result::Result<(Sample, usize), (usize, String)>;

fn synthesize_one(
    scene: usize,
    kind: PerturbationKind,
    seed: u64,
    ctx: &SceneContext,
    cfg: &SynthesisConfig,
) -> Draw {
    let expert = ctx.expert().map_err(|e| (0, e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = String::new();
    for attempt in 1..=cfg.max_attempts {
        let result = draw_spec(kind, expert, ctx, cfg, &mut rng).and_then(|spec| {
            let rough = apply(&spec, expert, ctx, cfg)?;
            let f = feasibility(&rough, ctx)?;
            if f.tracking_error >= cfg.max_tracking_error || f.lateral_accel >= cfg.max_lateral_accel {
                return Err(Error::Infeasible(format!(
                    "tracking error {:.2} m, lateral accel {:.2} m/s^2",
                    f.tracking_error, f.lateral_accel
                )));
            }
            let report = aggregate(&rough, ctx, &cfg.thresholds)?;
            let c = critique(&report, &rough, expert)?;
            Ok((spec, rough, c))
        });
        match result {
            Ok((spec, rough, critique)) => {
                let sample = Sample { scene, kind, spec, seed, rough, critique, target: expert.clone() };
                return Ok((sample, attempt));
            }
            Err(e) => last = e.to_string(),
        }
    }
    Err((cfg.max_attempts, last))
}

/// Synthesizes `cfg.samples_per_scene` perturbed trajectories per scene.
/// Scenes are processed in parallel; output order and content depend only
/// on the inputs and `seed`.
pub fn synthesize_batch(
    scenes: &[SceneContext],
    cfg: &SynthesisConfig,
    seed: u64,
) -> Result<(Vec<Sample>, SynthesisStats)> {
    cfg.validate()?;
    let per_scene: Vec<Vec<(PerturbationKind, Draw)>> = scenes
        .par_iter()
        .enumerate()
        .map(|(i, ctx)| {
            let mut rng = scene_rng(seed, i);
            (0..cfg.samples_per_scene)
                .map(|_| {
                    let kind = cfg.mix.sample(&mut rng);
                    let sub: u64 = rng.random();
                    (kind, synthesize_one(i, kind, sub, ctx, cfg))
                })
                .collect()
        })
        .collect();
    let mut stats = SynthesisStats { requested: scenes.len() * cfg.samples_per_scene, ..Default::default() };
    let mut samples = Vec::new();
    for (kind, r) in per_scene.into_iter().flatten() {
        match r {
            Ok((s, attempts)) => {
                stats.attempts += attempts;
                *stats.emitted_per_kind.entry(kind.name().into()).or_default() += 1;
                samples.push(s);
            }
            Err((attempts, reason)) => {
                stats.attempts += attempts;
                log::info!("skipped {} draw after {attempts} attempts: {reason}", kind.name());
                *stats.skipped_per_kind.entry(kind.name().into()).or_default() += 1;
                stats.skip_reasons.entry(kind.name().into()).or_default().push(reason);
            }
        }
    }
    stats.emitted = samples.len();
    Ok((samples, stats))
}
