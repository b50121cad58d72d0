use crate::config::CliConfig;
use crate::error::CliError;
use log::info;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Component, Path, PathBuf};
use trajcritic::critique::{critique as make_critique, render, Critique};
use trajcritic::perturb::{scene_rng, scenegen::random_scene, synthesize_batch, PerturbationKind, PerturbationMix, SynthesisStats};
use trajcritic::refine::{
    audit_theorem1, audit_theorem2, estimate_lipschitz, jitter_pairs, oracle_critic, q_star,
    refinement_traces, AssumptionEstimates, Case, Constants, RefinementTrace, SampleSummary, Theorem1Audit,
    Theorem2Audit,
};
use trajcritic::risk::{aggregate, RiskReport, SceneContext};
use trajcritic::sceneio::{
    build_corpus, load_corpus_scenes, load_scenario, load_scene, load_trajectory, mix_dataset, read_corpus,
    save_document, save_scenario, save_scene, save_trajectory, scene_path, write_corpus, CorpusRecord, MixManifest,
    MixMode,
};
use trajcritic::sim::{
    degrade_planner, run_episode, run_suite, suite::builtin_suite, EpisodeResult, ExpertPlanner, Scenario,
    SuiteReport, Variant,
};
use trajcritic::traj::Trajectory;

type Result<T> = std::result::Result<T, CliError>;

#[derive(Serialize)]
struct Report<'a, T> {
    command: &'a str,
    seed: u64,
    config: &'a CliConfig,
    result: &'a T,
}

fn emit<T: Serialize>(out: Option<PathBuf>, command: &str, cfg: &CliConfig, result: &T) -> Result<()> {
    if let Some(p) = out {
        save_document("report", &p, &Report { command, seed: cfg.seed, config: cfg, result })?;
        info!("wrote {}", p.display());
    }
    Ok(())
}

/// `target` expressed relative to the directory `base`, falling back to the
/// absolute path when no relative route exists.
fn relative_to(target: &Path, base: &Path) -> Result<String> {
    let canon = |p: &Path| {
        p.canonicalize().map_err(|e| trajcritic::Error::Io { path: p.display().to_string(), source: e })
    };
    let (t, b) = (canon(target)?, canon(base)?);
    let (tc, bc): (Vec<Component>, Vec<Component>) = (t.components().collect(), b.components().collect());
    let common = tc.iter().zip(&bc).take_while(|(x, y)| x == y).count();
    if common == 0 {
        return Ok(t.display().to_string());
    }
    let mut rel = PathBuf::new();
    bc[common..].iter().for_each(|_| rel.push(".."));
    tc[common..].iter().for_each(|c| rel.push(c));
    Ok(rel.to_string_lossy().replace('\\', "/"))
}

fn parent_dir(p: &Path) -> PathBuf {
    match p.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

#[derive(Serialize)]
struct CritiqueResult {
    risk: RiskReport,
    critique: Critique,
    text: String,
}

pub fn critique(cfg: &CliConfig, scene: &Path, trajectory: &Path, out: Option<PathBuf>) -> Result<()> {
    let ctx = load_scene(scene)?;
    let t = load_trajectory(trajectory)?;
    let risk = aggregate(&t, &ctx, &cfg.thresholds)?;
    let c = make_critique(&risk, &t, ctx.expert()?)?;
    let text = render(&c);
    print!("{text}");
    if !text.ends_with('\n') {
        println!();
    }
    emit(out, "critique", cfg, &CritiqueResult { risk, critique: c, text })
}

#[derive(Serialize)]
struct PerturbResult {
    shard: String,
    stats: SynthesisStats,
}

pub fn perturb(
    cfg: &CliConfig,
    scene: &Path,
    kind: Option<&str>,
    count: usize,
    shard: &Path,
    out: Option<PathBuf>,
) -> Result<()> {
    let ctx = load_scene(scene)?;
    let mut synthesis = cfg.synthesis;
    if let Some(k) = kind {
        let k = PerturbationKind::parse(k).ok_or_else(|| {
            trajcritic::Error::invalid(format!(
                "unknown perturbation kind `{k}`; expected one of increase_speed, reduce_speed, lane_change, collision"
            ))
        })?;
        synthesis.mix = PerturbationMix::only(k);
    }
    synthesis.samples_per_scene = count;
    let (samples, stats) = synthesize_batch(std::slice::from_ref(&ctx), &synthesis, cfg.seed)?;
    let scene_ref = relative_to(scene, &parent_dir(shard))?;
    let records: Vec<CorpusRecord> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| CorpusRecord::epas(format!("epas-{}-{i:05}", cfg.seed), scene_ref.clone(), s))
        .collect();
    write_corpus(shard, &records)?;
    println!("requested: {}", stats.requested);
    println!("emitted: {}", stats.emitted);
    for (k, n) in &stats.emitted_per_kind {
        println!("  {k}: {n}");
    }
    for (k, n) in &stats.skipped_per_kind {
        println!("skipped {k}: {n}");
    }
    emit(out, "perturb", cfg, &PerturbResult { shard: shard.display().to_string(), stats })
}

#[derive(Serialize)]
struct RefineResult {
    critiques: Vec<String>,
    trace: RefinementTrace,
}

pub fn refine(
    cfg: &CliConfig,
    scene: &Path,
    trajectory: &Path,
    steps: Option<usize>,
    refined: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<()> {
    let ctx = load_scene(scene)?;
    let a0 = load_trajectory(trajectory)?;
    let mut critic = cfg.critic;
    if let Some(k) = steps {
        critic.max_iterations = k;
    }
    let expert = ctx.expert()?;
    let trace = trajcritic::refine::iterate_refinement(
        &a0,
        &ctx,
        &[expert],
        cfg.audit.refine_constants,
        &critic,
        &cfg.thresholds,
    )?;
    let mut critiques = Vec::new();
    for (k, a) in trace.actions.iter().enumerate() {
        let c = oracle_critic(a, &ctx, &critic, &cfg.thresholds)?.critique;
        println!("step {k}: Q = {:.4} (Q* = {:.4}), distance to expert {:.3}", trace.q_values[k], trace.q_star, trace.rho_values[k]);
        critiques.push(render(&c));
    }
    if trace.fixed_point {
        println!("fixed point reached");
    }
    if let Some(p) = refined {
        save_trajectory(&p, trace.actions.last().expect("nonempty trace"))?;
    }
    emit(out, "refine", cfg, &RefineResult { critiques, trace })
}

struct Loaded {
    records: Vec<CorpusRecord>,
    scenes: BTreeMap<String, SceneContext>,
}

impl Loaded {
    fn read(corpus: &Path) -> Result<Loaded> {
        let records = read_corpus(corpus)?;
        if records.is_empty() {
            return Err(trajcritic::Error::invalid(format!("{} holds no records", corpus.display())).into());
        }
        let scenes = load_corpus_scenes(corpus, &records)?;
        Ok(Loaded { records, scenes })
    }

    fn cases(&self) -> Vec<Case<'_>> {
        self.records.iter().map(|r| Case { ctx: &self.scenes[&r.scene], action: &r.rough }).collect()
    }
}

#[derive(Serialize)]
struct AssumptionReport {
    records: usize,
    pairs: usize,
    beta_hat: f64,
    beta_min_ratio: f64,
    beta_samples: usize,
    skipped_at_optimum: usize,
    mean_q_star: f64,
    l_q: SampleSummary,
    l_c: SampleSummary,
    /// Worst-case constants, absent when no positive improvement ratio exists.
    constants: Option<Constants>,
}

fn estimate(cfg: &CliConfig, cases: &[Case]) -> Result<AssumptionEstimates> {
    let pairs = jitter_pairs(cases, cfg.audit.pairs, cfg.seed)?;
    let (critic, th) = (cfg.critic, cfg.thresholds);
    Ok(estimate_lipschitz(cases, &pairs, |a, ctx| Ok(oracle_critic(a, ctx, &critic, &th)?.action), &cfg.thresholds)?)
}

fn print_summary(name: &str, s: &SampleSummary) {
    let m = s.histogram.mode_bin();
    let lo = s.histogram.lo + m as f64 * s.histogram.bin_width;
    println!(
        "{name}: max {:.4}, mean {:.4}, p50 {:.4}, p99 {:.4}, mode bin {m} [{:.4}, {:.4})",
        s.max,
        s.mean,
        s.p50,
        s.p99,
        lo,
        lo + s.histogram.bin_width
    );
}

pub fn verify_assumptions(cfg: &CliConfig, corpus: &Path, out: Option<PathBuf>) -> Result<()> {
    let data = Loaded::read(corpus)?;
    let cases = data.cases();
    let est = estimate(cfg, &cases)?;
    let report = AssumptionReport {
        records: cases.len(),
        pairs: est.l_q_samples.len(),
        beta_hat: est.beta.beta_hat,
        beta_min_ratio: est.beta.min_ratio,
        beta_samples: est.beta.ratios.len(),
        skipped_at_optimum: est.beta.skipped,
        mean_q_star: est.mean_q_star,
        constants: Constants::worst_case(&est).ok(),
        l_q: est.l_q,
        l_c: est.l_c,
    };
    println!("records: {}", report.records);
    println!("pairs: {}", report.pairs);
    println!(
        "beta_hat: {:.4} (min ratio {:.4} over {} actions, {} already optimal)",
        report.beta_hat, report.beta_min_ratio, report.beta_samples, report.skipped_at_optimum
    );
    println!("mean Q*: {:.4}", report.mean_q_star);
    print_summary("L_Q", &report.l_q);
    print_summary("L_C", &report.l_c);
    emit(out, "verify assumptions", cfg, &report)
}

#[derive(Serialize)]
struct Theorem1Report {
    audit: Theorem1Audit,
    beta_hat: f64,
}

pub fn verify_theorem1(cfg: &CliConfig, corpus: &Path, out: Option<PathBuf>) -> Result<()> {
    let data = Loaded::read(corpus)?;
    let cases = data.cases();
    let est = estimate(cfg, &cases)?;
    let k = Constants::worst_case(&est)?;
    let reference: Vec<&Trajectory> = data.records.iter().map(|r| &r.rough).collect();
    let (critic, th) = (cfg.critic, cfg.thresholds);
    let audit = audit_theorem1(
        &cases,
        &reference,
        k,
        |a, ctx| Ok(oracle_critic(a, ctx, &critic, &th)?.action),
        &cfg.thresholds,
        cfg.audit.tolerance,
    )?;
    println!("constants: beta {:.4}, L_Q {:.4}, L_C {:.4}", k.beta, k.l_q, k.l_c);
    println!("checked: {}", audit.checked);
    println!("violations: {}", audit.violations);
    println!("min slack: {:.6}", audit.min_slack);
    let violations = audit.violations;
    emit(out, "verify theorem1", cfg, &Theorem1Report { audit, beta_hat: est.beta.beta_hat })?;
    if violations > 0 {
        return Err(CliError::Verification(format!("{violations} one-step bound violations")));
    }
    Ok(())
}

#[derive(Serialize)]
struct Theorem2Report {
    audit: Theorem2Audit,
    q_star_mean: f64,
}

pub fn verify_theorem2(cfg: &CliConfig, corpus: &Path, out: Option<PathBuf>) -> Result<()> {
    let data = Loaded::read(corpus)?;
    let cases = data.cases();
    let est = estimate(cfg, &cases)?;
    let k = Constants::worst_case(&est)?;
    let reference: Vec<&Trajectory> = data.records.iter().map(|r| &r.rough).collect();
    let traces = refinement_traces(&cases, &reference, k, &cfg.critic, &cfg.thresholds)?;
    let audit = audit_theorem2(&traces, k)?;
    println!("constants: beta {:.4}, L_Q {:.4}, L_C {:.4}, c_beta {:.4}", k.beta, k.l_q, k.l_c, audit.c_beta);
    println!("traces: {}", audit.traces);
    println!("steps: {}", audit.steps);
    println!("condition held: {}", audit.condition_held);
    println!("counterexamples: {}", audit.counterexamples);
    let gains: Vec<String> = audit.mean_gain_per_step.iter().map(|g| format!("{g:.4}")).collect();
    println!("mean Q gain per step: [{}]", gains.join(", "));
    let counterexamples = audit.counterexamples;
    let q_star_mean = cases.iter().map(|c| q_star(c.ctx, &cfg.thresholds)).collect::<trajcritic::Result<Vec<f64>>>()?;
    let q_star_mean = q_star_mean.iter().sum::<f64>() / q_star_mean.len() as f64;
    emit(out, "verify theorem2", cfg, &Theorem2Report { audit, q_star_mean })?;
    if counterexamples > 0 {
        return Err(CliError::Verification(format!("{counterexamples} steps lost value under the sufficient condition")));
    }
    Ok(())
}

pub struct SimOptions {
    pub refined: bool,
    pub steps: Option<usize>,
    pub sigma: Option<f64>,
    pub clean: bool,
    pub seeds: Vec<u64>,
}

#[derive(Serialize)]
#[serde(untagged)]
enum SimResult {
    Episode(EpisodeResult),
    Suite(SuiteReport),
}

pub fn simulate(cfg: &CliConfig, target: &str, opts: &SimOptions, out: Option<PathBuf>) -> Result<()> {
    let (scenarios, single): (Vec<Scenario>, bool) = if target == "suite" {
        (builtin_suite(), false)
    } else {
        (vec![load_scenario(Path::new(target))?], true)
    };
    let sigma = opts.sigma.unwrap_or(cfg.sim.sigma);
    let steps = if opts.refined { opts.steps.unwrap_or(cfg.sim.refine_steps) } else { 0 };
    let name = if opts.refined { "refined" } else { "raw" };
    let settings = cfg.sim_settings();
    if single && opts.seeds.len() == 1 {
        let seed = opts.seeds[0];
        let base = if opts.clean { ExpertPlanner::clean() } else { ExpertPlanner::degraded() };
        let planner = degrade_planner(base, sigma, seed)?;
        let r = run_episode(&scenarios[0], &planner, steps, &settings, seed)?;
        println!(
            "{} seed {seed}: success {}, completion {:.3}, max CTE {:.3} m",
            r.scenario, r.success, r.route_completion, r.max_cte
        );
        if let Some(c) = r.collision {
            println!("collision with actor {} at {:.2} s", c.actor_id, c.time);
        }
        if let Some(z) = r.zone_entry {
            println!("zone entry at {:.2} s", z.time);
        }
        return emit(out, "simulate", cfg, &SimResult::Episode(r));
    }
    let variant = Variant::new(name, !opts.clean, sigma, steps);
    let report = run_suite(&scenarios, &[variant], &opts.seeds, &settings)?;
    let v = &report.variants[0];
    println!(
        "{name}: success {:.3}, collisions {:.3}, completion {:.3}, mean max CTE {:.3} m, max CTE {:.3} m",
        v.success_rate, v.collision_rate, v.mean_completion, v.mean_cte, v.max_cte
    );
    for s in &v.per_seed {
        println!("  seed {}: success {:.3}, collisions {:.3}", s.seed, s.success_rate, s.collision_rate);
    }
    for e in &v.episodes {
        let outcome = match (e.collision, e.zone_entry) {
            (Some(c), _) => format!("collision with actor {} at {:.2} s", c.actor_id, c.time),
            (None, Some(z)) => format!("zone entry at {:.2} s", z.time),
            _ if e.success => "ok".to_string(),
            _ => "incomplete".to_string(),
        };
        println!("  {:<22} seed {:<4} completion {:.3}  {outcome}", e.scenario, e.seed, e.route_completion);
    }
    emit(out, "simulate", cfg, &SimResult::Suite(report))
}

#[derive(Serialize)]
struct MixReport {
    samples: String,
    manifest: MixManifest,
}

pub fn dataset_mix(
    cfg: &CliConfig,
    corpus: &Path,
    mode: MixMode,
    epoch: usize,
    samples: &Path,
    out: Option<PathBuf>,
) -> Result<()> {
    let records = read_corpus(corpus)?;
    let (mut drawn, manifest) = mix_dataset(&records, mode, epoch, cfg.seed)?;
    let dir = parent_dir(samples);
    std::fs::create_dir_all(&dir).map_err(|e| trajcritic::Error::Io { path: dir.display().to_string(), source: e })?;
    let mut rebased: BTreeMap<String, String> = BTreeMap::new();
    for r in &mut drawn {
        if !rebased.contains_key(&r.scene) {
            let moved = relative_to(&scene_path(corpus, &r.scene), &dir)?;
            rebased.insert(r.scene.clone(), moved);
        }
        r.scene = rebased[&r.scene].clone();
    }
    write_corpus(samples, &drawn)?;
    println!("epoch: {}", manifest.epoch_size);
    for (s, n) in &manifest.counts {
        println!("  {}: {n} (pool {})", s.name(), manifest.pool_sizes[s]);
    }
    emit(out, "dataset mix", cfg, &MixReport { samples: samples.display().to_string(), manifest })
}

pub fn dataset_build(cfg: &CliConfig, count: usize, out_dir: &Path) -> Result<()> {
    if count == 0 {
        return Err(trajcritic::Error::invalid("--scenes must be >= 1").into());
    }
    let scene_dir = out_dir.join("scenes");
    std::fs::create_dir_all(&scene_dir)
        .map_err(|e| trajcritic::Error::Io { path: scene_dir.display().to_string(), source: e })?;
    let mut scenes = Vec::with_capacity(count);
    for i in 0..count {
        let ctx = random_scene(&mut scene_rng(cfg.seed, i));
        let name = format!("scenes/scene_{i:04}.json");
        save_scene(&out_dir.join(&name), &ctx)?;
        scenes.push((name, ctx));
    }
    let (records, stats) = build_corpus(&scenes, &cfg.synthesis, cfg.dataset.mgs_sigma, cfg.seed)?;
    write_corpus(&out_dir.join("corpus.jsonl"), &records)?;
    let by_source = records.iter().fold(BTreeMap::new(), |mut m, r| {
        *m.entry(r.source.name()).or_insert(0usize) += 1;
        m
    });
    println!("scenes: {count}");
    for (s, n) in &by_source {
        println!("  {s}: {n}");
    }
    println!("synthesis attempts: {}", stats.attempts);
    Ok(())
}

pub fn export_suite(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| trajcritic::Error::Io { path: dir.display().to_string(), source: e })?;
    for sc in builtin_suite() {
        let p = dir.join(format!("{}.json", sc.name));
        save_scenario(&p, &sc)?;
        println!("{}", p.display());
    }
    Ok(())
}
