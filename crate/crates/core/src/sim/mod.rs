//! Closed-loop desk simulator: scripted actors, a planner, an optional
//! critic pass and the tracking controller, with collision and progress
//! bookkeeping.

mod planner;
mod scenario;
pub mod suite;

pub use planner::{degrade_planner, name_hash, ExpertParams, ExpertPlanner, Fault, NoisyPlanner, Planner};
pub use scenario::{ActorScript, Keyframe, LightPhase, LightScript, Scenario};

use crate::control::{actuate, ControlConfig, Controller, PlanTrack, VehicleParams};
use crate::error::{Error, Result};
use crate::geom::{point_in_polygon, sat_intersects};
use crate::refine::{oracle_critic, q_value, CriticConfig};
use crate::risk::{Extent, RiskThresholds, TrafficLight};
use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Everything besides the scenario and planner that shapes an episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub control: ControlConfig,
    pub vehicle: VehicleParams,
    pub critic: CriticConfig,
    pub thresholds: RiskThresholds,
    /// Minimum route completion for success.
    pub success_completion: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            control: ControlConfig::default(),
            vehicle: VehicleParams::default(),
            critic: CriticConfig::default(),
            thresholds: RiskThresholds::default(),
            success_completion: 0.98,
        }
    }
}

impl SimSettings {
    pub fn validate(&self) -> Result<()> {
        self.control.validate()?;
        self.vehicle.validate()?;
        self.critic.validate()?;
        self.thresholds.validate()?;
        if !(self.success_completion > 0.0 && self.success_completion <= 1.0) {
            return Err(Error::invalid(format!("success_completion must be in (0, 1], got {}", self.success_completion)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub speed: f64,
    pub steer: f64,
    pub throttle: f64,
    pub brake: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionRecord {
    pub actor_id: u32,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneEntry {
    /// Index into the forbidden zones; `None` for the signal zone.
    pub zone: Option<usize>,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub scenario: String,
    pub seed: u64,
    pub success: bool,
    pub collision: Option<CollisionRecord>,
    pub zone_entry: Option<ZoneEntry>,
    pub route_completion: f64,
    pub max_cte: f64,
    pub refinement_used: bool,
    /// Q of the plan and of each refinement of it, per planning instant.
    pub plan_q: Vec<Vec<f64>>,
    pub telemetry: Vec<TickRecord>,
}

fn ego_obb(state: &crate::geom::BicycleState) -> Result<crate::geom::Obb> {
    Extent::EGO.obb(state.pose)
}

/// Runs one episode. `refine_steps` critic passes are applied to every plan.
/// The result depends only on the arguments.
pub fn run_episode(
    sc: &Scenario,
    planner: &dyn Planner,
    refine_steps: usize,
    settings: &SimSettings,
    seed: u64,
) -> Result<EpisodeResult> {
    sc.validate()?;
    settings.validate()?;
    let reference = sc.reference()?;
    let clean = ExpertPlanner::clean();
    let mut controller = Controller::new(settings.control)?;
    let mut state = sc.ego;
    let ticks = (sc.duration / sc.tick).round() as usize;
    let replan_every = ((sc.replan_period / sc.tick).round() as usize).max(1);
    let goal = *sc.route.last().expect("validated route");
    let mut result = EpisodeResult {
        scenario: sc.name.clone(),
        seed,
        success: false,
        collision: None,
        zone_entry: None,
        route_completion: 0.0,
        max_cte: 0.0,
        refinement_used: refine_steps > 0,
        plan_q: Vec::new(),
        telemetry: Vec::with_capacity(ticks),
    };
    let mut track: Option<(PlanTrack, f64)> = None;
    for tick in 0..ticks {
        let t = tick as f64 * sc.tick;
        if tick % replan_every == 0 {
            let index = tick / replan_every;
            let wrap = |e: Error| Error::Planner { time: t, source: Box::new(e) };
            let mut plan = planner.plan(sc, &state, t, index).map_err(wrap)?;
            if refine_steps > 0 {
                let expert = clean.plan(sc, &state, t, index).map_err(wrap)?;
                let ctx = sc.context_at(&state, t, Some(expert))?;
                let mut qs = vec![q_value(&plan, &ctx, &settings.thresholds)?];
                for _ in 0..refine_steps {
                    plan = oracle_critic(&plan, &ctx, &settings.critic, &settings.thresholds)?.action;
                    qs.push(q_value(&plan, &ctx, &settings.thresholds)?);
                }
                result.plan_q.push(qs);
            }
            track = Some((PlanTrack::new(&plan)?, t));
        }
        let (plan, t_plan) = track.as_ref().expect("planned at tick 0");
        let desired = plan.desired_speed(t - t_plan);
        let cmd = controller.command(&state, &plan.path, desired, sc.tick)?;
        state = actuate(&state, &cmd, &settings.vehicle, sc.tick);
        let now = t + sc.tick;
        result.telemetry.push(TickRecord {
            t: now,
            x: state.pose.x,
            y: state.pose.y,
            yaw: state.pose.yaw,
            speed: state.speed,
            steer: cmd.steer,
            throttle: cmd.throttle,
            brake: cmd.brake,
        });
        let pr = reference.project(state.pose.position());
        result.max_cte = result.max_cte.max(pr.distance);
        result.route_completion = result.route_completion.max((pr.s / reference.length()).clamp(0.0, 1.0));
        let ego = ego_obb(&state)?;
        if let Some(a) = sc.actors.iter().find(|a| {
            a.extent.obb(a.pose_at(now)).map(|o| sat_intersects(&ego, &o)).unwrap_or(false)
        }) {
            result.collision = Some(CollisionRecord { actor_id: a.id, time: now });
            debug!("{}: collision with actor {} at {now:.2}s", sc.name, a.id);
            break;
        }
        if result.zone_entry.is_none() {
            let centre = state.pose.position();
            if let Some(z) = sc.forbidden_zones.iter().position(|z| point_in_polygon(centre, z)) {
                result.zone_entry = Some(ZoneEntry { zone: Some(z), time: now });
            } else if let Some(l) = &sc.light {
                if l.state_at(now) == TrafficLight::Red && point_in_polygon(centre, &l.zone) {
                    result.zone_entry = Some(ZoneEntry { zone: None, time: now });
                }
            }
        }
        if state.pose.position().distance(goal) <= sc.goal_radius {
            result.route_completion = 1.0;
            break;
        }
    }
    result.success = result.collision.is_none()
        && result.zone_entry.is_none()
        && result.route_completion >= settings.success_completion;
    Ok(result)
}

/// Planner choice and critic depth for one suite column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub name: String,
    /// Apply each scenario's fault.
    pub faulty: bool,
    pub sigma: f64,
    pub refine_steps: usize,
}

impl Variant {
    pub fn new(name: &str, faulty: bool, sigma: f64, refine_steps: usize) -> Self {
        Variant { name: name.to_string(), faulty, sigma, refine_steps }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub scenario: String,
    pub seed: u64,
    pub success: bool,
    pub collision: Option<CollisionRecord>,
    pub zone_entry: Option<ZoneEntry>,
    pub route_completion: f64,
    pub max_cte: f64,
    /// Mean Q gain of each refinement step over the episode's plans.
    pub q_gain_per_step: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub success_rate: f64,
    pub collision_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub mean_completion: f64,
    pub mean_cte: f64,
    pub max_cte: f64,
    pub q_gain_per_step: Vec<f64>,
    pub per_seed: Vec<SeedSummary>,
    pub episodes: Vec<EpisodeSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub settings: SimSettings,
    pub seeds: Vec<u64>,
    pub scenarios: Vec<String>,
    pub variants: Vec<VariantSummary>,
}

impl SuiteReport {
    pub fn variant(&self, name: &str) -> Option<&VariantSummary> {
        self.variants.iter().find(|v| v.variant.name == name)
    }
}

fn summarize(r: &EpisodeResult) -> EpisodeSummary {
    let steps = r.plan_q.first().map(|q| q.len() - 1).unwrap_or(0);
    let q_gain_per_step = (0..steps)
        .map(|k| r.plan_q.iter().map(|q| q[k + 1] - q[k]).sum::<f64>() / r.plan_q.len() as f64)
        .collect();
    EpisodeSummary {
        scenario: r.scenario.clone(),
        seed: r.seed,
        success: r.success,
        collision: r.collision,
        zone_entry: r.zone_entry,
        route_completion: r.route_completion,
        max_cte: r.max_cte,
        q_gain_per_step,
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Runs every (variant, seed, scenario) episode in parallel.
pub fn run_suite(scenarios: &[Scenario], variants: &[Variant], seeds: &[u64], settings: &SimSettings) -> Result<SuiteReport> {
    if scenarios.is_empty() || variants.is_empty() || seeds.is_empty() {
        return Err(Error::invalid("suite needs at least one scenario, variant and seed"));
    }
    let jobs: Vec<(usize, u64, usize)> = (0..variants.len())
        .flat_map(|v| seeds.iter().flat_map(move |s| (0..scenarios.len()).map(move |i| (v, *s, i))))
        .collect();
    let results: Vec<EpisodeSummary> = jobs
        .par_iter()
        .map(|&(v, seed, i)| {
            let var = &variants[v];
            let base = if var.faulty { ExpertPlanner::degraded() } else { ExpertPlanner::clean() };
            let planner = degrade_planner(base, var.sigma, seed)?;
            run_episode(&scenarios[i], &planner, var.refine_steps, settings, seed).map(|r| summarize(&r))
        })
        .collect::<Result<_>>()?;
    let per_variant = seeds.len() * scenarios.len();
    let mut out = Vec::with_capacity(variants.len());
    for (v, chunk) in variants.iter().zip(results.chunks(per_variant)) {
        let rate = |eps: &[EpisodeSummary], f: &dyn Fn(&EpisodeSummary) -> bool| {
            eps.iter().filter(|e| f(e)).count() as f64 / eps.len() as f64
        };
        let per_seed = chunk
            .chunks(scenarios.len())
            .zip(seeds)
            .map(|(eps, seed)| SeedSummary {
                seed: *seed,
                success_rate: rate(eps, &|e| e.success),
                collision_rate: rate(eps, &|e| e.collision.is_some()),
            })
            .collect();
        let steps = v.refine_steps;
        let summary = VariantSummary {
            variant: v.clone(),
            success_rate: rate(chunk, &|e| e.success),
            collision_rate: rate(chunk, &|e| e.collision.is_some()),
            mean_completion: mean(chunk.iter().map(|e| e.route_completion)),
            mean_cte: mean(chunk.iter().map(|e| e.max_cte)),
            max_cte: chunk.iter().map(|e| e.max_cte).fold(0.0, f64::max),
            q_gain_per_step: (0..steps).map(|k| mean(chunk.iter().map(|e| e.q_gain_per_step[k]))).collect(),
            per_seed,
            episodes: chunk.to_vec(),
        };
        info!("{}: success {:.3}, collisions {:.3}", v.name, summary.success_rate, summary.collision_rate);
        out.push(summary);
    }
    Ok(SuiteReport {
        settings: *settings,
        seeds: seeds.to_vec(),
        scenarios: scenarios.iter().map(|s| s.name.clone()).collect(),
        variants: out,
    })
}

#[cfg(test)]
mod tests;
