//! Deterministic oracle critic, trajectory value function and the
//! refinement-guarantee audits built on them.

mod audit;

pub use audit::{
    audit_theorem1, audit_theorem2, c_beta, estimate_beta, estimate_lipschitz, iterate_refinement, jitter_pairs,
    reference_distance, refinement_traces, theorem1_bound, AssumptionEstimates, BetaEstimate, Case, Constants, Histogram, JitterPair,
    RefinementTrace, SampleSummary, StepAudit, Theorem1Audit, Theorem2Audit,
};

use crate::critique::{critique, Critique};
use crate::error::{Error, Result};
use crate::geom::{Polyline, Vec2};
use crate::risk::{aggregate, analyze_context, RiskReport, RiskThresholds, SceneContext};
use crate::traj::{RouteWaypoints, SpeedWaypoints, Trajectory};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriticConfig {
    /// Fraction of the way each route point moves toward the expert.
    pub step_eta: f64,
    /// Fraction of the way each speed moves toward the expert profile.
    pub speed_blend: f64,
    /// Multiplier applied to all speeds before blending on a collision.
    pub collision_speed_cut: f64,
    pub max_iterations: usize,
    /// Blend strengths tried before falling back to the expert itself.
    pub escalation_rungs: usize,
}

impl Default for CriticConfig {
    fn default() -> Self {
        CriticConfig { step_eta: 0.5, speed_blend: 0.7, collision_speed_cut: 0.5, max_iterations: 3, escalation_rungs: 3 }
    }
}

impl CriticConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in
            [("step_eta", self.step_eta), ("speed_blend", self.speed_blend), ("collision_speed_cut", self.collision_speed_cut)]
        {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(format!("critic {name} must be in (0, 1], got {v}")));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("critic max_iterations must be >= 1"));
        }
        Ok(())
    }
}

fn value_of(report: &RiskReport) -> f64 {
    (6 - report.count()) as f64 / 6.0
}

/// Share of the six risk flags left untriggered.
pub fn q_value(t: &Trajectory, ctx: &SceneContext, th: &RiskThresholds) -> Result<f64> {
    Ok(value_of(&aggregate(t, ctx, th)?))
}

/// Best value any trajectory can reach in this scene: the scene-only flags
/// stay raised whatever the plan.
pub fn q_star(ctx: &SceneContext, th: &RiskThresholds) -> Result<f64> {
    let e = analyze_context(ctx, ctx.expert()?, th);
    let fixed = [e.pedestrian_flag(th), e.stop_sign_active, e.red_light].iter().filter(|f| **f).count();
    Ok((6 - fixed) as f64 / 6.0)
}

/// Critic output: the critique of the input and the refined action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub critique: Critique,
    pub action: Trajectory,
    /// Escalation rung that produced the action; `None` when unchanged.
    pub rung: Option<usize>,
}

fn blend(a: &[f64], b: &[f64], w: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + w * (y - x)).collect()
}

/// Applies the suggestions in `report` with route strength `eta` and speed
/// strength `sb`.
fn execute(a0: &Trajectory, expert: &Trajectory, report: &RiskReport, eta: f64, sb: f64, cut: f64) -> Result<Trajectory> {
    let route: Vec<Vec2> = if report.direction || report.collision {
        a0.route.points().iter().zip(expert.route.points()).map(|(p, e)| *p + (*e - *p) * eta).collect()
    } else {
        a0.route.points().to_vec()
    };
    let mut speeds = a0.speeds();
    if report.collision {
        speeds.iter_mut().for_each(|v| *v *= cut);
    }
    if report.speed || report.collision {
        speeds = blend(&speeds, &expert.speeds(), sb);
    }
    let start = a0.speed.points()[0];
    let mut path_pts = vec![start];
    path_pts.extend(route.iter().copied().filter(|p| p.distance(start) > 1e-9));
    let path = Polyline::new(path_pts)?;
    let speed = SpeedWaypoints::along(&path, 0.0, &speeds, a0.speed.dt())?;
    Ok(Trajectory::new(RouteWaypoints::new(route)?, speed))
}

/// Critiques `a0` and executes the suggestions. Only collision, speed and
/// direction flags are actionable; without one, or when `a0` already is the
/// expert, the input is returned as is.
///
/// Rung `j` blends with strengths `1 - (1 - s)^(j + 1)`; after the last rung
/// the expert itself is proposed. The first candidate that raises Q is
/// taken, else the first that keeps it, else `a0`.
pub fn oracle_critic(a0: &Trajectory, ctx: &SceneContext, cfg: &CriticConfig, th: &RiskThresholds) -> Result<Refinement> {
    cfg.validate()?;
    let expert = ctx.expert()?;
    if !a0.same_shape(expert) {
        return Err(Error::invalid("critic input and expert differ in shape"));
    }
    let report = aggregate(a0, ctx, th)?;
    let crit = critique(&report, a0, expert)?;
    if !(report.collision || report.speed || report.direction) || a0 == expert {
        return Ok(Refinement { critique: crit, action: a0.clone(), rung: None });
    }
    let q0 = value_of(&report);
    let mut keep: Option<(Trajectory, usize)> = None;
    for j in 0..=cfg.escalation_rungs {
        let candidate = if j == cfg.escalation_rungs {
            expert.clone()
        } else {
            let grow = |s: f64| 1.0 - (1.0 - s).powi(j as i32 + 1);
            execute(a0, expert, &report, grow(cfg.step_eta), grow(cfg.speed_blend), cfg.collision_speed_cut)?
        };
        let q = q_value(&candidate, ctx, th)?;
        if q > q0 {
            return Ok(Refinement { critique: crit, action: candidate, rung: Some(j) });
        }
        if q == q0 && keep.is_none() {
            keep = Some((candidate, j));
        }
    }
    Ok(match keep {
        Some((action, j)) => Refinement { critique: crit, action, rung: Some(j) },
        None => Refinement { critique: crit, action: a0.clone(), rung: None },
    })
}

#[cfg(test)]
mod tests;
