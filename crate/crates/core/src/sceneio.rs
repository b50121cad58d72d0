//! File formats: versioned JSON documents for scenes, scenarios,
//! trajectories and reports; line-delimited corpora of critique records;
//! and epoch mixing of record pools.
//!
//! Units everywhere: meters, seconds, radians, m/s.

use crate::critique::{critique, render, Critique};
use crate::error::{Error, Result};
use crate::perturb::{gaussian_noise, scene_rng, synthesize_batch, PerturbationSpec, Sample, SynthesisConfig, SynthesisStats};
use crate::risk::{aggregate, RiskThresholds, SceneContext};
use crate::sim::Scenario;
use crate::traj::Trajectory;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::{DeserializeOwned, IgnoredAny};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Deserialize)]
struct Header {
    schema_version: u32,
    kind: String,
    #[serde(rename = "data")]
    _data: IgnoredAny,
}

#[derive(Serialize)]
struct EnvelopeOut<'a, T> {
    schema_version: u32,
    kind: &'a str,
    data: &'a T,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvelopeIn<T> {
    #[serde(rename = "schema_version")]
    _version: u32,
    #[serde(rename = "kind")]
    _kind: String,
    data: T,
}

fn parse_err(context: &str, e: impl std::fmt::Display) -> Error {
    Error::Parse { context: context.to_string(), message: e.to_string() }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

/// Renders `value` as a pretty-printed document of the given kind.
pub fn to_document<T: Serialize>(kind: &str, value: &T) -> Result<String> {
    let env = EnvelopeOut { schema_version: SCHEMA_VERSION, kind, data: value };
    let mut s = serde_json::to_string_pretty(&env).map_err(|e| parse_err(kind, e))?;
    s.push('\n');
    Ok(s)
}

/// Parses a document, checking its version and kind. `context` names the
/// source in error messages.
pub fn from_document<T: DeserializeOwned>(kind: &str, text: &str, context: &str) -> Result<T> {
    let h: Header = serde_json::from_str(text).map_err(|e| parse_err(context, e))?;
    if h.schema_version != SCHEMA_VERSION {
        return Err(parse_err(
            context,
            format!("unsupported schema_version {} (this build reads {SCHEMA_VERSION})", h.schema_version),
        ));
    }
    if h.kind != kind {
        return Err(parse_err(context, format!("expected a {kind} document, found kind `{}`", h.kind)));
    }
    let env: EnvelopeIn<T> = serde_json::from_str(text).map_err(|e| parse_err(context, e))?;
    Ok(env.data)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn load_document<T: DeserializeOwned>(kind: &str, path: &Path) -> Result<T> {
    from_document(kind, &read_text(path)?, &path.display().to_string())
}

pub fn save_document<T: Serialize>(kind: &str, path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_document(kind, value)?)
}

pub fn load_scene(path: &Path) -> Result<SceneContext> {
    let scene: SceneContext = load_document("scene", path)?;
    scene.validate()?;
    Ok(scene)
}

pub fn save_scene(path: &Path, scene: &SceneContext) -> Result<()> {
    save_document("scene", path, scene)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let sc: Scenario = load_document("scenario", path)?;
    sc.validate()?;
    Ok(sc)
}

pub fn save_scenario(path: &Path, sc: &Scenario) -> Result<()> {
    save_document("scenario", path, sc)
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    load_document("trajectory", path)
}

pub fn save_trajectory(path: &Path, t: &Trajectory) -> Result<()> {
    save_document("trajectory", path, t)
}

/// Origin of a corpus record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Source {
    /// Produced by a planner.
    #[serde(rename = "MGS")]
    Mgs,
    /// Synthesized by perturbing the expert.
    #[serde(rename = "EPAS")]
    Epas,
    /// The expert itself.
    #[serde(rename = "GT")]
    Gt,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::Mgs => "MGS",
            Source::Epas => "EPAS",
            Source::Gt => "GT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Provenance {
    Perturbation { spec: PerturbationSpec, seed: u64 },
    Planner { id: String, seed: u64 },
    Expert,
}

/// One (rough action, critique, refined target) example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusRecord {
    pub record_id: String,
    pub source: Source,
    /// Scene file, relative to the corpus file's directory unless absolute.
    pub scene: String,
    pub rough: Trajectory,
    pub critique_text: String,
    pub critique: Critique,
    pub refined: Trajectory,
    pub provenance: Provenance,
}

impl CorpusRecord {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(format!("record {}: {m}", self.record_id)));
        if self.record_id.is_empty() {
            return Err(Error::invalid("record_id must not be empty"));
        }
        if render(&self.critique) != self.critique_text {
            return bad("critique_text does not match the structured critique");
        }
        if !self.rough.same_shape(&self.refined) {
            return bad("rough and refined trajectories differ in shape");
        }
        match self.source {
            Source::Gt if self.rough != self.refined => bad("GT record must have rough == refined"),
            Source::Gt if self.critique.any() => bad("GT record must have all flags false"),
            Source::Epas if !matches!(self.provenance, Provenance::Perturbation { .. }) => {
                bad("EPAS record must carry its perturbation spec")
            }
            _ => Ok(()),
        }
    }

    /// Record for a synthesized perturbation.
    pub fn epas(record_id: String, scene: String, sample: &Sample) -> CorpusRecord {
        CorpusRecord {
            record_id,
            source: Source::Epas,
            scene,
            rough: sample.rough.clone(),
            critique_text: render(&sample.critique),
            critique: sample.critique.clone(),
            refined: sample.target.clone(),
            provenance: Provenance::Perturbation { spec: sample.spec, seed: sample.seed },
        }
    }

    /// Record for a planner output, critiqued against the scene's expert.
    pub fn mgs(
        record_id: String,
        scene: String,
        ctx: &SceneContext,
        rough: Trajectory,
        planner: &str,
        seed: u64,
        th: &RiskThresholds,
    ) -> Result<CorpusRecord> {
        let expert = ctx.expert()?;
        let c = critique(&aggregate(&rough, ctx, th)?, &rough, expert)?;
        Ok(CorpusRecord {
            record_id,
            source: Source::Mgs,
            scene,
            rough,
            critique_text: render(&c),
            critique: c,
            refined: expert.clone(),
            provenance: Provenance::Planner { id: planner.to_string(), seed },
        })
    }

    /// Record pairing the expert with itself; fails if the expert raises
    /// any flag in this scene.
    pub fn gt(record_id: String, scene: String, ctx: &SceneContext, th: &RiskThresholds) -> Result<CorpusRecord> {
        let expert = ctx.expert()?;
        let c = critique(&aggregate(expert, ctx, th)?, expert, expert)?;
        if c.any() {
            return Err(Error::invalid(format!("record {record_id}: expert raises flags, not usable as GT")));
        }
        Ok(CorpusRecord {
            record_id,
            source: Source::Gt,
            scene,
            rough: expert.clone(),
            critique_text: render(&c),
            critique: c,
            refined: expert.clone(),
            provenance: Provenance::Expert,
        })
    }
}

/// Builds a three-source corpus over named scenes: synthesized EPAS
/// records, one noisy-planner MGS record per scene and a GT record for
/// every scene whose expert raises no flag.
pub fn build_corpus(
    scenes: &[(String, SceneContext)],
    synthesis: &SynthesisConfig,
    mgs_sigma: f64,
    seed: u64,
) -> Result<(Vec<CorpusRecord>, SynthesisStats)> {
    if !(mgs_sigma > 0.0 && mgs_sigma.is_finite()) {
        return Err(Error::invalid(format!("MGS noise sigma must be > 0, got {mgs_sigma}")));
    }
    let contexts: Vec<SceneContext> = scenes.iter().map(|s| s.1.clone()).collect();
    let (samples, stats) = synthesize_batch(&contexts, synthesis, seed)?;
    let mut records: Vec<CorpusRecord> = Vec::new();
    let mut per_scene = vec![0usize; scenes.len()];
    for s in &samples {
        let k = per_scene[s.scene];
        per_scene[s.scene] += 1;
        records.push(CorpusRecord::epas(format!("epas-{:04}-{k}", s.scene), scenes[s.scene].0.clone(), s));
    }
    let planner = format!("expert+noise({mgs_sigma})");
    for (i, (name, ctx)) in scenes.iter().enumerate() {
        let mut rng = scene_rng(seed ^ 0x4d47_5300, i);
        let rough = gaussian_noise(ctx.expert()?, mgs_sigma, &mut rng)?;
        records.push(CorpusRecord::mgs(format!("mgs-{i:04}"), name.clone(), ctx, rough, &planner, seed, &synthesis.thresholds)?);
        if let Ok(r) = CorpusRecord::gt(format!("gt-{i:04}"), name.clone(), ctx, &synthesis.thresholds) {
            records.push(r);
        }
    }
    Ok((records, stats))
}

#[derive(Serialize)]
struct LineOut<'a> {
    schema_version: u32,
    #[serde(flatten)]
    record: &'a CorpusRecord,
}

#[derive(Deserialize)]
struct LineIn {
    schema_version: u32,
    #[serde(flatten)]
    record: CorpusRecord,
}

pub fn write_corpus(path: &Path, records: &[CorpusRecord]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(&LineOut { schema_version: SCHEMA_VERSION, record: r })
            .map_err(|e| parse_err(&r.record_id, e))?;
        writeln!(w, "{line}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads and validates every record; blank lines are skipped.
pub fn read_corpus(path: &Path) -> Result<Vec<CorpusRecord>> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let context = format!("{}:{}", path.display(), i + 1);
        let parsed: LineIn = serde_json::from_str(&line).map_err(|e| parse_err(&context, e))?;
        if parsed.schema_version != SCHEMA_VERSION {
            return Err(parse_err(&context, format!("unsupported schema_version {}", parsed.schema_version)));
        }
        parsed.record.validate().map_err(|e| parse_err(&context, e))?;
        out.push(parsed.record);
    }
    Ok(out)
}

/// Resolves a record's scene reference against the corpus location.
pub fn scene_path(corpus: &Path, scene: &str) -> PathBuf {
    let p = Path::new(scene);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        corpus.parent().unwrap_or(Path::new("")).join(p)
    }
}

/// Loads each distinct scene referenced by `records` once.
pub fn load_corpus_scenes(corpus: &Path, records: &[CorpusRecord]) -> Result<BTreeMap<String, SceneContext>> {
    let mut scenes = BTreeMap::new();
    for r in records {
        if !scenes.contains_key(&r.scene) {
            scenes.insert(r.scene.clone(), load_scene(&scene_path(corpus, &r.scene))?);
        }
    }
    Ok(scenes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixMode {
    /// 85% MGS, 15% GT.
    Base,
    /// Half EPAS, half an 85/15 MGS/GT blend.
    Full,
}

pub const GT_SHARE: f64 = 0.15;
pub const EPAS_SHARE: f64 = 0.5;

/// Exact per-source sample counts for an epoch; they sum to `epoch_size`.
pub fn mix_counts(mode: MixMode, epoch_size: usize) -> BTreeMap<Source, usize> {
    let epas = match mode {
        MixMode::Base => 0,
        MixMode::Full => (EPAS_SHARE * epoch_size as f64).round() as usize,
    };
    let rest = epoch_size - epas;
    let gt = (GT_SHARE * rest as f64).round() as usize;
    BTreeMap::from([(Source::Mgs, rest - gt), (Source::Epas, epas), (Source::Gt, gt)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixManifest {
    pub mode: MixMode,
    pub epoch_size: usize,
    pub seed: u64,
    /// Records available per source.
    pub pool_sizes: BTreeMap<Source, usize>,
    /// Records drawn per source.
    pub counts: BTreeMap<Source, usize>,
    /// Drawn record ids in epoch order.
    pub sample_ids: Vec<String>,
}

/// Draws an epoch from `records`, partitioned by source, with replacement,
/// then shuffles it.
pub fn mix_dataset(
    records: &[CorpusRecord],
    mode: MixMode,
    epoch_size: usize,
    seed: u64,
) -> Result<(Vec<CorpusRecord>, MixManifest)> {
    if epoch_size == 0 {
        return Err(Error::invalid("epoch size must be >= 1"));
    }
    let mut pools: BTreeMap<Source, Vec<&CorpusRecord>> = BTreeMap::new();
    for r in records {
        pools.entry(r.source).or_default().push(r);
    }
    let counts = mix_counts(mode, epoch_size);
    let required: &[Source] = match mode {
        MixMode::Base => &[Source::Mgs, Source::Gt],
        MixMode::Full => &[Source::Mgs, Source::Gt, Source::Epas],
    };
    for s in required {
        if pools.get(s).is_none_or(|p| p.is_empty()) {
            return Err(Error::invalid(format!("{} pool is empty but {:?} mode needs it", s.name(), mode)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut epoch: Vec<&CorpusRecord> = Vec::with_capacity(epoch_size);
    for (source, &n) in &counts {
        if n == 0 {
            continue;
        }
        let pool = &pools[source];
        epoch.extend((0..n).map(|_| pool[rng.random_range(0..pool.len())]));
    }
    epoch.shuffle(&mut rng);
    let manifest = MixManifest {
        mode,
        epoch_size,
        seed,
        pool_sizes: [Source::Mgs, Source::Epas, Source::Gt]
            .iter()
            .map(|s| (*s, pools.get(s).map_or(0, |p| p.len())))
            .collect(),
        counts,
        sample_ids: epoch.iter().map(|r| r.record_id.clone()).collect(),
    };
    Ok((epoch.into_iter().cloned().collect(), manifest))
}
