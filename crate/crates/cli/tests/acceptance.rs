//! Acceptance suite. Runs every criterion, prints one line each and exits
//! non-zero if any fails.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, PI};
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};
use trajcritic::control::{actuate, ControlConfig, Controller, VehicleParams};
use trajcritic::geom::{sat_intersects, BicycleState, Obb, Polyline, Pose2D, Vec2};
use trajcritic::oracles::{dense_cross_track, obb_boundary_distance, raster_overlap};
use trajcritic::perturb::{
    scale_speed, scene_rng, scenegen::random_scene, synthesize_batch, PerturbationKind, PerturbationMix,
    PerturbationSpec, Sample, SynthesisConfig,
};
use trajcritic::refine::{
    audit_theorem1, audit_theorem2, estimate_lipschitz, jitter_pairs, oracle_critic, refinement_traces, Case,
    Constants, CriticConfig,
};
use trajcritic::risk::{
    aggregate, analyze_context, ego_rollout, Actor, ActorClass, Extent, RiskThresholds, SceneContext,
};
use trajcritic::sceneio::{mix_dataset, read_corpus, MixMode, Source};
use trajcritic::sim::{
    degrade_planner, run_episode, run_suite, suite::builtin_suite, ExpertPlanner, SimSettings, SuiteReport, Variant,
};
use trajcritic::traj::{straight, RouteWaypoints, Trajectory};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn repo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

// ---- 1: threshold boundaries ----

const INDICATORS: [&str; 8] =
    ["collision", "speed", "direction", "pedestrian", "stop_sign", "traffic_light", "complex", "adverse"];

fn indicators(pred: &Trajectory, ctx: &SceneContext, th: &RiskThresholds) -> [bool; 8] {
    let r = aggregate(pred, ctx, th).expect("aggregate");
    let c = analyze_context(ctx, pred, th);
    let f = r.flags();
    [f[0], f[1], f[2], f[3], f[4], f[5], c.complex, c.adverse]
}

fn scene(expert: Trajectory) -> SceneContext {
    let ego = BicycleState::new(Pose2D::new(0.0, 0.0, 0.0), 5.0, 2.9).unwrap();
    SceneContext::empty(ego, 15.0).with_expert(expert)
}

fn line(speed: f64, route_len: usize) -> Trajectory {
    straight(Vec2::ZERO, 0.0, speed, route_len, 10, 0.25).unwrap()
}

fn map_route(t: &Trajectory, f: impl Fn(Vec2) -> Vec2) -> Trajectory {
    let route = RouteWaypoints::new(t.route.points().iter().map(|p| f(*p)).collect()).unwrap();
    Trajectory::new(route, t.speed.clone())
}

fn pedestrian_at(y: f64) -> Actor {
    Actor {
        id: 1,
        class: ActorClass::Pedestrian,
        extent: Extent::PEDESTRIAN,
        forecast: vec![Pose2D::new(0.0, y, 0.0); 10],
    }
}

fn vehicles(n: u32) -> Vec<Actor> {
    (0..n)
        .map(|i| Actor {
            id: 10 + i,
            class: ActorClass::Vehicle,
            extent: Extent::CAR,
            forecast: vec![Pose2D::new(-30.0 - 6.0 * i as f64, 3.5, 0.0); 10],
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let th = RiskThresholds::default();
    // (name, expected indicator, below-threshold case, above-threshold case)
    type Case = (Trajectory, SceneContext);
    let mut checks: Vec<(&str, usize, Case, Case)> = Vec::new();

    let e12 = line(5.0, 12);
    let rot = |deg: f64| map_route(&e12, |p| p.rotate(deg.to_radians()));
    checks.push(("heading 7.5 deg", 2, (rot(7.49), scene(e12.clone())), (rot(7.51), scene(e12.clone()))));

    let e20 = line(5.0, 20);
    let shift = |dy: f64| map_route(&e20, |p| p + Vec2::new(0.0, dy));
    checks.push(("cte 2.0 m", 2, (shift(-1.999), scene(e20.clone())), (shift(-2.001), scene(e20.clone()))));

    let at = |v: f64| (line(v, 20), scene(line(v, 20)));
    checks.push(("speed 0.9 limit", 1, at(13.49), at(13.51)));

    let dev = |pred: f64, exp: f64| (line(pred, 20), scene(line(exp, 20)));
    checks.push(("relative 20% (abs met)", 1, dev(5.99, 5.0), dev(6.01, 5.0)));
    checks.push(("absolute 0.5 m/s (rel met)", 1, dev(2.49, 2.0), dev(2.51, 2.0)));

    let ped = |y: f64| {
        let mut ctx = scene(e20.clone());
        ctx.actors.push(pedestrian_at(y));
        (e20.clone(), ctx)
    };
    // inside the radius is the raising side
    checks.push(("pedestrian 10 m", 3, ped(10.01), ped(9.99)));

    let crowd = |n: u32| {
        let mut ctx = scene(e20.clone());
        ctx.actors = vehicles(n);
        (e20.clone(), ctx)
    };
    checks.push(("actors 6 vs 7", 6, crowd(6), crowd(7)));

    let wet = |w: f64| {
        let mut ctx = scene(e20.clone());
        ctx.environment.wetness = w;
        (e20.clone(), ctx)
    };
    checks.push(("wetness 0.40", 7, wet(0.40), wet(0.41)));

    let mut failures = Vec::new();
    for (name, idx, (p0, c0), (p1, c1)) in &checks {
        let lo = indicators(p0, c0, &th);
        let hi = indicators(p1, c1, &th);
        let changed: Vec<usize> = (0..8).filter(|i| lo[*i] != hi[*i]).collect();
        if changed != [*idx] || lo[*idx] || !hi[*idx] {
            let names: Vec<&str> = changed.iter().map(|i| INDICATORS[*i]).collect();
            failures.push(format!("{name}: changed {names:?}"));
        }
    }
    if failures.is_empty() {
        outcome(true, format!("{} boundaries, each flips exactly its own indicator", checks.len()))
    } else {
        outcome(false, failures.join("; "))
    }
}

// ---- 2: SAT vs rasterization ----

fn random_obb(rng: &mut ChaCha8Rng) -> Obb {
    let z_min = [0.0, 0.0, 0.0, 1.0, 2.5][rng.random_range(0..5)];
    Obb::new(
        Pose2D::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0), rng.random_range(-PI..PI)),
        rng.random_range(0.2..2.5),
        rng.random_range(0.2..2.5),
        z_min,
        z_min + rng.random_range(0.5..2.0),
    )
    .unwrap()
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut compared, mut excluded, mut overlapping, mut mismatches) = (0usize, 0usize, 0usize, 0usize);
    while compared < 10_000 {
        let (a, b) = (random_obb(&mut rng), random_obb(&mut rng));
        if obb_boundary_distance(&a, &b) < 0.02 {
            excluded += 1;
            continue;
        }
        compared += 1;
        let sat = sat_intersects(&a, &b);
        overlapping += sat as usize;
        if sat != raster_overlap(&a, &b, 0.01) {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0,
        format!("{compared} pairs ({overlapping} overlapping, {excluded} near-boundary excluded), {mismatches} disagreements"),
    )
}

// ---- 3, 4: refinement audits on a synthesized corpus ----

struct AuditCorpus {
    scenes: Vec<SceneContext>,
    samples: Vec<Sample>,
    constants: Constants,
    build_time: Duration,
}

fn audit_corpus() -> AuditCorpus {
    let start = Instant::now();
    let scenes: Vec<SceneContext> = (0..250).map(|i| random_scene(&mut scene_rng(77, i))).collect();
    let cfg = SynthesisConfig { samples_per_scene: 24, ..SynthesisConfig::default() };
    let (samples, _) = synthesize_batch(&scenes, &cfg, 77).expect("synthesis");
    let cases: Vec<Case> = samples.iter().map(|s| Case { ctx: &scenes[s.scene], action: &s.rough }).collect();
    let pairs = jitter_pairs(&cases, 20_000, 77).expect("pairs");
    let (critic, th) = (CriticConfig::default(), RiskThresholds::default());
    let est = estimate_lipschitz(&cases, &pairs, |a, ctx| Ok(oracle_critic(a, ctx, &critic, &th)?.action), &th)
        .expect("estimates");
    let constants = Constants::worst_case(&est).expect("positive beta");
    AuditCorpus { build_time: start.elapsed(), scenes, samples, constants }
}

fn cases(c: &AuditCorpus) -> Vec<Case<'_>> {
    c.samples.iter().map(|s| Case { ctx: &c.scenes[s.scene], action: &s.rough }).collect()
}

fn criterion_3(c: &AuditCorpus) -> (Outcome, Duration) {
    let start = Instant::now();
    let cases = cases(c);
    let reference: Vec<&Trajectory> = c.samples.iter().map(|s| &s.rough).collect();
    let (critic, th) = (CriticConfig::default(), RiskThresholds::default());
    let audit = audit_theorem1(
        &cases,
        &reference,
        c.constants,
        |a, ctx| Ok(oracle_critic(a, ctx, &critic, &th)?.action),
        &th,
        1e-9,
    )
    .expect("audit");
    let k = c.constants;
    let detail = format!(
        "{} actions, {} violations, min slack {:.4} (beta {:.4}, L_Q {:.4}, L_C {:.4})",
        audit.checked, audit.violations, audit.min_slack, k.beta, k.l_q, k.l_c
    );
    (outcome(audit.checked >= 5000 && audit.violations == 0, detail), start.elapsed() + c.build_time)
}

fn criterion_4(c: &AuditCorpus) -> (Outcome, Duration) {
    let start = Instant::now();
    let cases = cases(c);
    let reference: Vec<&Trajectory> = c.samples.iter().map(|s| &s.rough).collect();
    let traces = refinement_traces(&cases, &reference, c.constants, &CriticConfig::default(), &RiskThresholds::default())
        .expect("traces");
    let audit = audit_theorem2(&traces, c.constants).expect("audit");
    let detail = format!(
        "{} traces, {} steps, condition held on {}, {} counterexamples",
        audit.traces, audit.steps, audit.condition_held, audit.counterexamples
    );
    (outcome(audit.condition_held > 0 && audit.counterexamples == 0, detail), start.elapsed() + c.build_time)
}

// ---- 5, 6, 7: closed-loop suite ----

fn suite(variants: &[Variant], seeds: &[u64]) -> SuiteReport {
    run_suite(&builtin_suite(), variants, seeds, &SimSettings::default()).expect("suite")
}

fn seed_rate(r: &SuiteReport, variant: &str, seed: u64) -> f64 {
    let v = r.variant(variant).unwrap();
    v.per_seed.iter().find(|s| s.seed == seed).unwrap().success_rate
}

fn seed_q_gains(r: &SuiteReport, variant: &str, seed: u64) -> Vec<f64> {
    let eps: Vec<_> = r.variant(variant).unwrap().episodes.iter().filter(|e| e.seed == seed).collect();
    let steps = eps[0].q_gain_per_step.len();
    (0..steps).map(|k| eps.iter().map(|e| e.q_gain_per_step[k]).sum::<f64>() / eps.len() as f64).collect()
}

fn criterion_5() -> Outcome {
    let variants = [
        Variant::new("raw", true, 0.5, 0),
        Variant::new("one", true, 0.5, 1),
        Variant::new("two", true, 0.5, 2),
    ];
    let r = suite(&variants, &[1, 2, 3]);
    let mut pass = true;
    let mut parts = Vec::new();
    for seed in [1, 2, 3] {
        let q = seed_q_gains(&r, "two", seed);
        let (raw, one, two) = (seed_rate(&r, "raw", seed), seed_rate(&r, "one", seed), seed_rate(&r, "two", seed));
        let (sr1, sr2) = (one - raw, two - one);
        pass &= q[0] > q[1] && sr1 > sr2;
        parts.push(format!("seed {seed}: dQ {:.4} > {:.4}, dSR {:.3} > {:.3}", q[0], q[1], sr1, sr2));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_6() -> Outcome {
    let sigmas = [0.0, 0.5, 1.0];
    let variants: Vec<Variant> = sigmas.iter().map(|s| Variant::new(&format!("sigma {s}"), true, *s, 1)).collect();
    let seeds = [1, 2, 3];
    let r = suite(&variants, &seeds);
    let rates: Vec<f64> = variants.iter().map(|v| r.variant(&v.name).unwrap().success_rate).collect();
    let pass = rates.windows(2).all(|w| w[1] <= w[0]);
    let per_seed: Vec<String> = seeds
        .iter()
        .map(|s| {
            let xs: Vec<String> = variants.iter().map(|v| format!("{:.3}", seed_rate(&r, &v.name, *s))).collect();
            format!("seed {s} [{}]", xs.join(", "))
        })
        .collect();
    outcome(
        pass,
        format!(
            "success over seeds 1-3 at sigma 0/0.5/1.0: {:.3} >= {:.3} >= {:.3}; per seed {}",
            rates[0],
            rates[1],
            rates[2],
            per_seed.join(", ")
        ),
    )
}

fn criterion_7() -> Outcome {
    let r = suite(&[Variant::new("raw", true, 0.5, 0), Variant::new("refined", true, 0.5, 1)], &[1, 2, 3, 4, 5]);
    let raw = r.variant("raw").unwrap().success_rate;
    let refined = r.variant("refined").unwrap().success_rate;
    let gap = 100.0 * (refined - raw);
    outcome(gap >= 15.0, format!("refined {:.1}% vs raw {:.1}%: +{gap:.1} pp", 100.0 * refined, 100.0 * raw))
}

// ---- 8: perturbation guarantees ----

fn criterion_8() -> Outcome {
    let scenes: Vec<SceneContext> = (0..1000).map(|i| random_scene(&mut scene_rng(808, i))).collect();
    let cfg = SynthesisConfig { samples_per_scene: 100, ..SynthesisConfig::default() };
    let (samples, stats) = synthesize_batch(&scenes, &cfg, 808).expect("synthesis");

    let mut problems = Vec::new();
    let (mut collisions, mut scaled) = (0usize, 0usize);
    for s in &samples {
        match s.spec {
            PerturbationSpec::ForcedCollision(target) => {
                collisions += 1;
                let ctx = &scenes[s.scene];
                let actor = ctx.actor(target.actor_id).unwrap();
                let poses = ego_rollout(&s.rough, ctx).unwrap();
                let k = (target.t_crash / s.rough.speed.dt()).round() as usize;
                let hit = (k - 1..=(k + 1).min(poses.len() - 1)).any(|j| {
                    sat_intersects(&ctx.ego_extent.obb(poses[j]).unwrap(), &actor.obb_at(j).unwrap())
                });
                if !hit {
                    problems.push(format!("collision sample scene {} misses actor {}", s.scene, target.actor_id));
                }
            }
            PerturbationSpec::SpeedScale { gamma } => {
                scaled += 1;
                let again = scale_speed(&s.target, gamma).unwrap();
                let same = |a: &Trajectory, b: &Trajectory| {
                    a.route.points().iter().zip(b.route.points()).all(|(p, q)| {
                        p.x.to_bits() == q.x.to_bits() && p.y.to_bits() == q.y.to_bits()
                    }) && a.route.len() == b.route.len()
                };
                if !same(&s.rough, &s.target) || !same(&again, &s.target) {
                    problems.push(format!("speed scaling moved the route in scene {}", s.scene));
                }
            }
            PerturbationSpec::LaneDeviation { .. } => {}
        }
    }

    let mix = PerturbationMix::default();
    let total = stats.requested as f64;
    let mut freq = Vec::new();
    for k in PerturbationKind::ALL {
        let drawn = stats.emitted_per_kind.get(k.name()).copied().unwrap_or(0)
            + stats.skipped_per_kind.get(k.name()).copied().unwrap_or(0);
        let f = drawn as f64 / total;
        if (f - mix.weight(k)).abs() > 0.005 {
            problems.push(format!("{} drawn at {:.4}, expected {:.4}", k.name(), f, mix.weight(k)));
        }
        freq.push(format!("{} {:.4}", k.name(), f));
    }
    let detail = format!(
        "{} draws, {} forced collisions verified, {} speed scalings with identical routes, kinds [{}]{}",
        stats.requested,
        collisions,
        scaled,
        freq.join(", "),
        if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
    );
    outcome(problems.is_empty() && collisions > 0 && scaled > 0 && stats.requested >= 100_000, detail)
}

// ---- 9: epoch mixing ----

fn criterion_9() -> Outcome {
    let records = read_corpus(&repo().join("data/corpus/corpus.jsonl")).expect("shipped corpus");
    let mut problems = Vec::new();
    let mut parts = Vec::new();
    for (mode, expected) in [
        (MixMode::Base, [(Source::Gt, 0.15), (Source::Mgs, 0.85), (Source::Epas, 0.0)]),
        (MixMode::Full, [(Source::Gt, 0.075), (Source::Mgs, 0.425), (Source::Epas, 0.5)]),
    ] {
        let (drawn, manifest) = mix_dataset(&records, mode, 10_000, 5).expect("mix");
        let (again, _) = mix_dataset(&records, mode, 10_000, 5).expect("mix");
        let (other, _) = mix_dataset(&records, mode, 10_000, 6).expect("mix");
        let ids = |rs: &[trajcritic::sceneio::CorpusRecord]| rs.iter().map(|r| r.record_id.clone()).collect::<Vec<_>>();
        if ids(&drawn) != ids(&again) || ids(&drawn) != manifest.sample_ids {
            problems.push(format!("{mode:?} epoch not reproducible"));
        }
        if ids(&drawn) == ids(&other) {
            problems.push(format!("{mode:?} epoch ignores the seed"));
        }
        for (source, share) in expected {
            let f = drawn.iter().filter(|r| r.source == source).count() as f64 / drawn.len() as f64;
            if (f - share).abs() > 0.015 {
                problems.push(format!("{mode:?} {} share {f:.4}, expected {share}", source.name()));
            }
            parts.push(format!("{mode:?} {} {f:.4}", source.name()));
        }
        // GT share inside the MGS + GT half of a full epoch
        if mode == MixMode::Full {
            let base: Vec<_> = drawn.iter().filter(|r| r.source != Source::Epas).collect();
            let f = base.iter().filter(|r| r.source == Source::Gt).count() as f64 / base.len() as f64;
            if (f - 0.15).abs() > 0.015 {
                problems.push(format!("full GT share of the base half {f:.4}"));
            }
        }
    }
    let mut detail = parts.join(", ");
    if !problems.is_empty() {
        detail = format!("{detail}; {}", problems.join("; "));
    }
    outcome(problems.is_empty(), detail)
}

// ---- 10: control ----

const DT: f64 = 0.05;

fn settle_time(from: f64, to: f64) -> Option<f64> {
    let params = VehicleParams::default();
    let mut ctl = Controller::new(ControlConfig::default()).unwrap();
    let path = Polyline::new(vec![Vec2::new(0.0, 0.0), Vec2::new(2000.0, 0.0)]).unwrap();
    let mut s = BicycleState::new(Pose2D::new(0.0, 0.0, 0.0), from, 2.9).unwrap();
    let mut last_outside = 0.0;
    for k in 1..=(30.0 / DT) as usize {
        let cmd = ctl.command(&s, &path, to, DT).unwrap();
        s = actuate(&s, &cmd, &params, DT);
        if (s.speed - to).abs() > 0.25 {
            last_outside = k as f64 * DT;
        }
    }
    (last_outside < 30.0 - DT).then_some(last_outside)
}

fn arc_cte(radius: f64) -> f64 {
    let mut pts = vec![Vec2::new(-10.0, 0.0)];
    pts.extend((0..=180).map(|i| {
        let a = FRAC_PI_2 * i as f64 / 180.0;
        Vec2::new(radius * a.sin(), radius * (1.0 - a.cos()))
    }));
    pts.push(Vec2::new(radius, radius + 15.0));
    let path = Polyline::new(pts.clone()).unwrap();
    let params = VehicleParams::default();
    let mut ctl = Controller::new(ControlConfig::default()).unwrap();
    let mut s = BicycleState::new(Pose2D::new(-10.0, 0.0, 0.0), 5.0, 2.9).unwrap();
    let mut trace = Vec::new();
    for _ in 0..((radius * FRAC_PI_2 + 20.0) / 5.0 / DT) as usize {
        let cmd = ctl.command(&s, &path, 5.0, DT).unwrap();
        s = actuate(&s, &cmd, &params, DT);
        trace.push(s.pose.position());
    }
    dense_cross_track(&trace, &pts, 0.005)
}

fn criterion_10() -> Outcome {
    let settle = settle_time(0.0, 5.0);
    let ctes: Vec<(f64, f64)> = [15.0, 20.0, 30.0].iter().map(|r| (*r, arc_cte(*r))).collect();
    let settings = SimSettings::default();
    let (mut ticks, mut violations) = (0usize, 0usize);
    for sc in builtin_suite() {
        for seed in [1, 2, 3] {
            for (faulty, sigma, steps) in [(false, 0.0, 0), (true, 0.5, 0), (true, 0.5, 1), (true, 1.0, 2)] {
                let base = if faulty { ExpertPlanner::degraded() } else { ExpertPlanner::clean() };
                let planner = degrade_planner(base, sigma, seed).unwrap();
                let r = run_episode(&sc, &planner, steps, &settings, seed).unwrap();
                ticks += r.telemetry.len();
                violations += r.telemetry.iter().filter(|t| t.brake && t.throttle != 0.0).count();
            }
        }
    }
    let settled = settle.is_some_and(|t| t <= 4.0);
    let arcs_ok = ctes.iter().all(|(_, c)| *c < 0.4);
    let arcs: Vec<String> = ctes.iter().map(|(r, c)| format!("R{r}: {c:.3} m")).collect();
    outcome(
        settled && arcs_ok && violations == 0 && ticks > 0,
        format!(
            "0->5 m/s settles at {}, arc max CTE [{}], {violations} brake ticks with throttle over {ticks} ticks",
            settle.map_or("never".to_string(), |t| format!("{t:.2} s")),
            arcs.join(", ")
        ),
    )
}

// ---- 11: assumption distributions via the CLI ----

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("assumptions.json");
    let out = Command::new(env!("CARGO_BIN_EXE_trajcritic"))
        .arg("verify")
        .arg("assumptions")
        .arg(repo().join("data/corpus/corpus.jsonl"))
        .arg("--set")
        .arg("audit.pairs=20000")
        .arg("--out")
        .arg(&report)
        .output()
        .expect("run cli");
    if !out.status.success() {
        return outcome(false, format!("cli failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let result = &doc["data"]["result"];
    let pairs = result["pairs"].as_u64().unwrap_or(0);
    let mut pass = pairs >= 20_000;
    let mut parts = vec![format!("{pairs} pairs")];
    for name in ["l_q", "l_c"] {
        let s = &result[name];
        let max = s["max"].as_f64().unwrap_or(f64::NAN);
        let counts: Vec<u64> = s["histogram"]["counts"].as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).collect();
        let best = *counts.iter().max().unwrap();
        let mode = counts.iter().position(|c| *c == best).unwrap();
        // near the origin: the fullest bin lies in the lowest tenth of [0, max]
        let near = (mode as f64) < counts.len() as f64 / 10.0;
        pass &= max.is_finite() && near;
        parts.push(format!("{name} max {max:.4}, mode bin {mode}/{}", counts.len()));
    }
    outcome(pass, parts.join(", "))
}

fn main() {
    let mut failed = 0;
    let mut report = |n: u32, name: &str, o: Outcome, took: Duration, limit: Option<Duration>| {
        let in_time = limit.is_none_or(|l| took <= l);
        let pass = o.pass && in_time;
        failed += !pass as usize;
        let budget = limit.map_or(String::new(), |l| format!(" / {} s", l.as_secs()));
        let late = if in_time { "" } else { " [over time budget]" };
        println!(
            "criterion {n:>2} {name:<28} {} ({:.2} s{budget}){late}: {}",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            o.detail
        );
    };
    let timed = |f: fn() -> Outcome| {
        let start = Instant::now();
        let o = f();
        (o, start.elapsed())
    };
    let secs = |s: u64| Some(Duration::from_secs(s));

    let (o, t) = timed(criterion_1);
    report(1, "threshold fidelity", o, t, Some(Duration::from_secs(1)));
    let (o, t) = timed(criterion_2);
    report(2, "SAT oracle equivalence", o, t, secs(60));
    let corpus = audit_corpus();
    let (o, t) = criterion_3(&corpus);
    report(3, "one-step bound audit", o, t, secs(300));
    let (o, t) = criterion_4(&corpus);
    report(4, "monotone refinement audit", o, t, secs(300));
    let (o, t) = timed(criterion_5);
    report(5, "diminishing returns", o, t, None);
    let (o, t) = timed(criterion_6);
    report(6, "noise monotonicity", o, t, None);
    let (o, t) = timed(criterion_7);
    report(7, "refined beats raw", o, t, secs(600));
    let (o, t) = timed(criterion_8);
    report(8, "perturbation guarantees", o, t, None);
    let (o, t) = timed(criterion_9);
    report(9, "mixing ratios", o, t, None);
    let (o, t) = timed(criterion_10);
    report(10, "control stability", o, t, None);
    let (o, t) = timed(criterion_11);
    report(11, "assumption distributions", o, t, secs(600));

    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
