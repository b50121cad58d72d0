use super::{oracle_critic, q_star, q_value, CriticConfig};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::risk::{RiskThresholds, SceneContext};
use crate::traj::{traj_distance, RouteWaypoints, SpeedWaypoints, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// An action together with the scene it was planned in.
#[derive(Debug, Clone, Copy)]
pub struct Case<'a> {
    pub ctx: &'a SceneContext,
    pub action: &'a Trajectory,
}

/// Improvement ratios of a critic over a set of actions below the optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    /// Mean ratio clamped to [0, 1].
    pub beta_hat: f64,
    pub min_ratio: f64,
    pub ratios: Vec<f64>,
    /// Actions already at the optimum, which carry no ratio.
    pub skipped: usize,
}

/// Fraction of the optimality gap closed by one critic step, per action.
pub fn estimate_beta<F>(cases: &[Case], critic: F, th: &RiskThresholds) -> Result<BetaEstimate>
where
    F: Fn(&Trajectory, &SceneContext) -> Result<Trajectory> + Sync,
{
    let per: Vec<Option<f64>> = cases
        .par_iter()
        .map(|c| {
            let q0 = q_value(c.action, c.ctx, th)?;
            let qs = q_star(c.ctx, th)?;
            if q0 >= qs {
                return Ok(None);
            }
            let q1 = q_value(&critic(c.action, c.ctx)?, c.ctx, th)?;
            Ok(Some((q1 - q0) / (qs - q0)))
        })
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> = per.iter().flatten().copied().collect();
    if ratios.is_empty() {
        return Err(Error::UndefinedEstimate("no action below the optimum; improvement ratio undefined".into()));
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    Ok(BetaEstimate {
        beta_hat: mean.clamp(0.0, 1.0),
        min_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        skipped: per.len() - ratios.len(),
        ratios,
    })
}

/// Two nearby actions in the same scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JitterPair {
    pub case: usize,
    pub a: Trajectory,
    pub b: Trajectory,
}

fn jitter(t: &Trajectory, scale: f64, rng: &mut ChaCha8Rng) -> Result<Trajectory> {
    let mut noisy = |pts: &[Vec2]| -> Vec<Vec2> {
        pts.iter()
            .map(|p| {
                let dx: f64 = StandardNormal.sample(rng);
                let dy: f64 = StandardNormal.sample(rng);
                *p + Vec2::new(dx, dy) * scale
            })
            .collect()
    };
    let route = RouteWaypoints::new(noisy(t.route.points()))?;
    let speed = SpeedWaypoints::new(noisy(t.speed.points()), t.speed.dt())?;
    Ok(Trajectory::new(route, speed))
}

/// `count` pairs, each an action from `cases` and a copy with every
/// coordinate perturbed by Gaussian noise of a per-pair scale drawn from
/// U(0.05, 1.0) m.
pub fn jitter_pairs(cases: &[Case], count: usize, seed: u64) -> Result<Vec<JitterPair>> {
    if cases.is_empty() {
        return Err(Error::invalid("no actions to jitter"));
    }
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let case = rng.random_range(0..cases.len());
            let scale = rng.random_range(0.05..1.0);
            let a = cases[case].action.clone();
            let b = jitter(&a, scale, &mut rng)?;
            Ok(JitterPair { case, a, b })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub bin_width: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Equal-width bins over [0, max(samples)].
    pub fn from_samples(samples: &[f64], bins: usize) -> Histogram {
        let bins = bins.max(1);
        let max = samples.iter().copied().fold(0.0, f64::max);
        let bin_width = if max > 0.0 { max / bins as f64 } else { 1.0 };
        let mut counts = vec![0; bins];
        for s in samples {
            counts[((s / bin_width) as usize).min(bins - 1)] += 1;
        }
        Histogram { lo: 0.0, bin_width, counts }
    }

    /// Index of the fullest bin (the lowest on ties).
    pub fn mode_bin(&self) -> usize {
        let best = self.counts.iter().copied().max().unwrap_or(0);
        self.counts.iter().position(|c| *c == best).unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub histogram: Histogram,
}

impl SampleSummary {
    pub fn new(samples: &[f64], bins: usize) -> Result<SampleSummary> {
        if samples.is_empty() {
            return Err(Error::UndefinedEstimate("no samples to summarize".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = |p: f64| sorted[((sorted.len() - 1) as f64 * p).round() as usize];
        Ok(SampleSummary {
            count: sorted.len(),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            p50: q(0.5),
            p90: q(0.9),
            p99: q(0.99),
            histogram: Histogram::from_samples(samples, bins),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionEstimates {
    pub beta: BetaEstimate,
    /// Scene-dependent optimum, averaged over the action set.
    pub mean_q_star: f64,
    pub l_q_samples: Vec<f64>,
    pub l_c_samples: Vec<f64>,
    pub l_q: SampleSummary,
    pub l_c: SampleSummary,
}

/// Value and critic sensitivity ratios over jittered pairs, plus the
/// improvement ratio over `cases`.
pub fn estimate_lipschitz<F>(
    cases: &[Case],
    pairs: &[JitterPair],
    critic: F,
    th: &RiskThresholds,
) -> Result<AssumptionEstimates>
where
    F: Fn(&Trajectory, &SceneContext) -> Result<Trajectory> + Sync,
{
    let samples: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|p| {
            let ctx = cases
                .get(p.case)
                .ok_or_else(|| Error::invalid(format!("pair refers to missing case {}", p.case)))?
                .ctx;
            let d = traj_distance(&p.a, &p.b)?;
            if !(d > 0.0) {
                return Err(Error::invalid("pair members coincide; distance must be > 0"));
            }
            let lq = (q_value(&p.a, ctx, th)? - q_value(&p.b, ctx, th)?).abs() / d;
            let lc = traj_distance(&critic(&p.a, ctx)?, &critic(&p.b, ctx)?)? / d;
            Ok((lq, lc))
        })
        .collect::<Result<_>>()?;
    let l_q_samples: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let l_c_samples: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let stars: Vec<f64> = cases.par_iter().map(|c| q_star(c.ctx, th)).collect::<Result<_>>()?;
    Ok(AssumptionEstimates {
        beta: estimate_beta(cases, &critic, th)?,
        mean_q_star: stars.iter().sum::<f64>() / stars.len().max(1) as f64,
        l_q: SampleSummary::new(&l_q_samples, 50)?,
        l_c: SampleSummary::new(&l_c_samples, 50)?,
        l_q_samples,
        l_c_samples,
    })
}

/// Lower bound on the value after one critic step from an action at
/// distance `rho0` from the reference set.
pub fn theorem1_bound(q_a0: f64, q_star: f64, beta: f64, rho0: f64, l_q: f64, l_c: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::OutOfRange(format!("beta must be in (0, 1], got {beta}")));
    }
    if !(rho0 >= 0.0 && l_q >= 0.0 && l_c >= 0.0) {
        return Err(Error::OutOfRange(format!("rho0, l_q, l_c must be >= 0, got {rho0}, {l_q}, {l_c}")));
    }
    Ok(beta * q_star + (1.0 - beta) * q_a0 - rho0 * l_q * (1.0 - beta + l_c))
}

/// Largest distance-to-gap ratio for which a step is guaranteed not to
/// lose value.
pub fn c_beta(beta: f64, l_q: f64, l_c: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::OutOfRange(format!("beta must be in (0, 1], got {beta}")));
    }
    if !(l_q > 0.0 && l_c >= 0.0) {
        return Err(Error::OutOfRange(format!("need l_q > 0 and l_c >= 0, got {l_q}, {l_c}")));
    }
    Ok(beta / (l_q * (1.0 - beta + l_c)))
}

/// Distance to the nearest same-shaped action in `reference`.
pub fn reference_distance(a: &Trajectory, reference: &[&Trajectory]) -> f64 {
    reference.iter().filter_map(|r| traj_distance(a, r).ok()).fold(f64::INFINITY, f64::min)
}

/// Worst-case constants entering both bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub beta: f64,
    pub l_q: f64,
    pub l_c: f64,
}

impl Constants {
    /// Smallest improvement ratio and largest sensitivity ratios observed.
    pub fn worst_case(est: &AssumptionEstimates) -> Result<Constants> {
        let c = Constants { beta: est.beta.min_ratio, l_q: est.l_q.max, l_c: est.l_c.max };
        if !(c.beta > 0.0) {
            return Err(Error::UndefinedEstimate(format!(
                "critic fails to improve some action (min ratio {}); no positive beta",
                c.beta
            )));
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Audit {
    pub constants: Constants,
    pub checked: usize,
    pub violations: usize,
    pub tolerance: f64,
    /// Smallest Q(A1) - bound over all checked actions.
    pub min_slack: f64,
    pub mean_rho0: f64,
}

/// Checks Q(C(A0)) against the one-step bound for every action in `cases`.
pub fn audit_theorem1<F>(
    cases: &[Case],
    reference: &[&Trajectory],
    constants: Constants,
    critic: F,
    th: &RiskThresholds,
    tolerance: f64,
) -> Result<Theorem1Audit>
where
    F: Fn(&Trajectory, &SceneContext) -> Result<Trajectory> + Sync,
{
    if reference.is_empty() {
        return Err(Error::invalid("reference set is empty"));
    }
    let rows: Vec<(f64, f64)> = cases
        .par_iter()
        .map(|c| {
            let q0 = q_value(c.action, c.ctx, th)?;
            let qs = q_star(c.ctx, th)?;
            let q1 = q_value(&critic(c.action, c.ctx)?, c.ctx, th)?;
            let rho0 = reference_distance(c.action, reference);
            let bound = theorem1_bound(q0, qs, constants.beta, rho0, constants.l_q, constants.l_c)?;
            Ok((q1 - bound, rho0))
        })
        .collect::<Result<_>>()?;
    Ok(Theorem1Audit {
        constants,
        checked: rows.len(),
        violations: rows.iter().filter(|r| r.0 < -tolerance).count(),
        tolerance,
        min_slack: rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min),
        mean_rho0: rows.iter().map(|r| r.1).sum::<f64>() / rows.len().max(1) as f64,
    })
}

/// One critic application inside a refinement trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepAudit {
    /// One-step lower bound on the value after this step.
    pub bound: f64,
    /// Whether the sufficient condition for non-decreasing value held.
    pub condition: bool,
    pub improved: bool,
    pub q_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementTrace {
    pub q_star: f64,
    pub actions: Vec<Trajectory>,
    pub q_values: Vec<f64>,
    pub rho_values: Vec<f64>,
    /// One entry per applied step; `actions.len() - 1` long.
    pub steps: Vec<StepAudit>,
    pub fixed_point: bool,
}

/// Applies the oracle critic repeatedly, recording value, distance to the
/// reference set and the step guarantees. Stops after `cfg.max_iterations`
/// steps or once the action no longer moves.
pub fn iterate_refinement(
    a0: &Trajectory,
    ctx: &SceneContext,
    reference: &[&Trajectory],
    constants: Constants,
    cfg: &CriticConfig,
    th: &RiskThresholds,
) -> Result<RefinementTrace> {
    if reference.is_empty() {
        return Err(Error::invalid("reference set is empty"));
    }
    cfg.validate()?;
    let cb = c_beta(constants.beta, constants.l_q, constants.l_c)?;
    let qs = q_star(ctx, th)?;
    let mut trace = RefinementTrace {
        q_star: qs,
        actions: vec![a0.clone()],
        q_values: vec![q_value(a0, ctx, th)?],
        rho_values: vec![reference_distance(a0, reference)],
        steps: Vec::new(),
        fixed_point: false,
    };
    for _ in 0..cfg.max_iterations {
        let a = trace.actions.last().expect("nonempty");
        let (q, rho) = (*trace.q_values.last().unwrap(), *trace.rho_values.last().unwrap());
        let next = oracle_critic(a, ctx, cfg, th)?.action;
        if traj_distance(&next, a)? < 1e-9 {
            trace.fixed_point = true;
            break;
        }
        let q_next = q_value(&next, ctx, th)?;
        trace.steps.push(StepAudit {
            bound: theorem1_bound(q, qs, constants.beta, rho, constants.l_q, constants.l_c)?,
            condition: rho <= cb * (qs - q),
            improved: q_next >= q,
            q_gain: q_next - q,
        });
        trace.rho_values.push(reference_distance(&next, reference));
        trace.q_values.push(q_next);
        trace.actions.push(next);
    }
    Ok(trace)
}

/// Refinement traces for every case, computed in parallel.
pub fn refinement_traces(
    cases: &[Case],
    reference: &[&Trajectory],
    constants: Constants,
    cfg: &CriticConfig,
    th: &RiskThresholds,
) -> Result<Vec<RefinementTrace>> {
    cases.par_iter().map(|c| iterate_refinement(c.action, c.ctx, reference, constants, cfg, th)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Audit {
    pub constants: Constants,
    pub c_beta: f64,
    pub traces: usize,
    pub steps: usize,
    pub condition_held: usize,
    /// Steps where the condition held yet the value dropped.
    pub counterexamples: usize,
    /// Mean value gain of the k-th step over all traces; a trace that
    /// stopped earlier contributes zero.
    pub mean_gain_per_step: Vec<f64>,
}

pub fn audit_theorem2(traces: &[RefinementTrace], constants: Constants) -> Result<Theorem2Audit> {
    let depth = traces.iter().map(|t| t.actions.len() - 1).max().unwrap_or(0);
    let mut sums = vec![(0.0, 0usize); depth];
    for t in traces {
        for (k, s) in t.steps.iter().enumerate() {
            sums[k].0 += s.q_gain;
            sums[k].1 += 1;
        }
    }
    let all = traces.iter().flat_map(|t| &t.steps);
    Ok(Theorem2Audit {
        constants,
        c_beta: c_beta(constants.beta, constants.l_q, constants.l_c)?,
        traces: traces.len(),
        steps: all.clone().count(),
        condition_held: all.clone().filter(|s| s.condition).count(),
        counterexamples: all.filter(|s| s.condition && !s.improved).count(),
        mean_gain_per_step: sums.iter().map(|(s, _)| s / traces.len() as f64).collect(),
    })
}
