//! Seeded scene grids, the parallel runner, and its CSV/JSON artifacts.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{confusion_matrix, summarize_with, EvalRecord, EvalReport, Thresholds};
use crate::attention::{
    band_range_mask, binarize, magnitude_ratio_mask, psm_mask, random_band_mask, AttentionMask,
};
use crate::error::{Error, Result};
use crate::estimate::{sps_loss, Estimator, EstimatorConfig, Method};
use crate::geometry::{ArrayConfig, DoaGrid};
use crate::signal::{stft, Spectrogram, StftConfig};
use crate::simulate::{mix_scene, Propagation, RoomSpec, SceneSpec, SourceSignal, SourceSpec};

pub const CONFIG_VERSION: u32 = 1;

/// Source directions: a point count for a uniform [0°, 180°] grid, or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DoaSet {
    Count(usize),
    List(Vec<f64>),
}

impl DoaSet {
    pub fn angles(&self) -> Result<Vec<f64>> {
        match self {
            DoaSet::Count(n) => Ok(DoaGrid::uniform(*n)?.angles().to_vec()),
            DoaSet::List(v) => {
                if let Some(a) = v.iter().find(|a| !(0.0..=180.0).contains(*a)) {
                    return Err(Error::Config(format!("DOA {a} outside [0, 180]")));
                }
                Ok(v.clone())
            }
        }
    }
}

/// Attention mask applied by the mask-aware methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MaskKind {
    None,
    OraclePsm,
    OracleRatio,
    /// Oracle magnitude ratio mask binarized at the threshold.
    OracleRatioBin(f64),
    RandomBands(usize),
    BandRange(usize, usize),
}

impl fmt::Display for MaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaskKind::None => f.write_str("none"),
            MaskKind::OraclePsm => f.write_str("oracle-psm"),
            MaskKind::OracleRatio => f.write_str("oracle-ratio"),
            MaskKind::OracleRatioBin(t) => write!(f, "oracle-ratio-bin:{t}"),
            MaskKind::RandomBands(n) => write!(f, "random-bands:{n}"),
            MaskKind::BandRange(lo, hi) => write!(f, "band-range:{lo}:{hi}"),
        }
    }
}

impl FromStr for MaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Config(format!(
                "invalid mask '{s}' (valid: none, oracle-psm, oracle-ratio, oracle-ratio-bin:<thr>, random-bands:<n>, band-range:<lo>:<hi>)"
            ))
        };
        let parts: Vec<&str> = s.split(':').collect();
        Ok(match parts.as_slice() {
            ["none"] => MaskKind::None,
            ["oracle-psm"] => MaskKind::OraclePsm,
            ["oracle-ratio"] => MaskKind::OracleRatio,
            ["oracle-ratio-bin", t] => {
                let t: f64 = t.parse().map_err(|_| bad())?;
                if !(0.0..=1.0).contains(&t) {
                    return Err(bad());
                }
                MaskKind::OracleRatioBin(t)
            }
            ["random-bands", n] => MaskKind::RandomBands(n.parse().map_err(|_| bad())?),
            ["band-range", lo, hi] => MaskKind::BandRange(
                lo.parse().map_err(|_| bad())?,
                hi.parse().map_err(|_| bad())?,
            ),
            _ => return Err(bad()),
        })
    }
}

impl TryFrom<String> for MaskKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MaskKind> for String {
    fn from(m: MaskKind) -> String {
        m.to_string()
    }
}

fn default_smd() -> Vec<f64> {
    vec![1.5]
}
fn default_one() -> usize {
    1
}
fn default_separation() -> f64 {
    5.0
}
fn default_duration() -> usize {
    100
}
fn default_margin() -> f64 {
    1.0
}
fn default_sample_rate() -> f64 {
    16_000.0
}
fn default_grid_size() -> usize {
    37
}
fn default_masks() -> Vec<MaskKind> {
    vec![MaskKind::None]
}
fn default_eval_frames() -> Vec<usize> {
    vec![50]
}

/// The scene grid: every room × T60 × SMD × DOA × seed combination is one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneGrid {
    pub rooms: Vec<[f64; 3]>,
    pub t60: Vec<f64>,
    #[serde(default = "default_smd")]
    pub smd: Vec<f64>,
    pub doas: DoaSet,
    /// Keep only target DOAs inside `[lo, hi]`.
    #[serde(default)]
    pub doa_range: Option<[f64; 2]>,
    #[serde(default = "default_one")]
    pub seeds_per_doa: usize,
    pub target: SourceSignal,
    #[serde(default)]
    pub interferer: Option<SourceSignal>,
    /// SIR drawn uniformly from `[lo, hi]` dB per scene.
    #[serde(default)]
    pub sir_db: [f64; 2],
    /// SNR drawn uniformly from `[lo, hi]` dB per scene; absent means no sensor noise.
    #[serde(default)]
    pub snr_db: Option<[f64; 2]>,
    #[serde(default = "default_separation")]
    pub min_separation_deg: f64,
    #[serde(default)]
    pub propagation: Propagation,
    #[serde(default = "default_duration")]
    pub duration_frames: usize,
    #[serde(default = "default_margin")]
    pub wall_margin_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub master_seed: u64,
    pub scenes: SceneGrid,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: f64,
    #[serde(default)]
    pub stft: StftConfig,
    #[serde(default)]
    pub array: ArrayConfig,
    /// Points of the estimation grid.
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default)]
    pub methods: Vec<Method>,
    #[serde(default = "default_masks")]
    pub masks: Vec<MaskKind>,
    /// Lengths of the evaluation windows, centred in each scene.
    #[serde(default = "default_eval_frames")]
    pub eval_frames: Vec<usize>,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub metrics: Thresholds,
    /// Microphone used for oracle masks.
    #[serde(default)]
    pub oracle_channel: usize,
}

const TOP_KEYS: &[&str] = &[
    "version",
    "master_seed",
    "scenes",
    "sample_rate",
    "stft",
    "array",
    "grid_size",
    "methods",
    "masks",
    "eval_frames",
    "estimator",
    "metrics",
    "oracle_channel",
];
const SCENE_KEYS: &[&str] = &[
    "rooms",
    "t60",
    "smd",
    "doas",
    "doa_range",
    "seeds_per_doa",
    "target",
    "interferer",
    "sir_db",
    "snr_db",
    "min_separation_deg",
    "propagation",
    "duration_frames",
    "wall_margin_m",
];

fn unknown_keys(value: &serde_json::Value, known: &[&str], prefix: &str, out: &mut Vec<String>) {
    if let Some(obj) = value.as_object() {
        out.extend(
            obj.keys()
                .filter(|k| !known.contains(&k.as_str()))
                .map(|k| format!("{prefix}{k}")),
        );
    }
}

impl ExperimentConfig {
    /// Parses and validates a JSON config. Every unknown key is reported.
    pub fn from_json(text: &str) -> Result<Self> {
        let config = Self::parse(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Parses without checking the estimation settings, as needed when only
    /// the scene grid is used.
    pub fn parse(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        if !value.is_object() {
            return Err(Error::Config("config must be a JSON object".into()));
        }
        let mut unknown = Vec::new();
        unknown_keys(&value, TOP_KEYS, "", &mut unknown);
        if let Some(scenes) = value.get("scenes") {
            unknown_keys(scenes, SCENE_KEYS, "scenes.", &mut unknown);
        }
        if !unknown.is_empty() {
            return Err(Error::Config(format!(
                "unknown config keys: {}",
                unknown.join(", ")
            )));
        }
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; call [`validate`](Self::validate) or
    /// [`validate_scenes`](Self::validate_scenes) on the result.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::File {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Checks the scene grid, STFT and array settings.
    pub fn validate_scenes(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.version != CONFIG_VERSION {
            return fail(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            ));
        }
        let s = &self.scenes;
        if s.rooms.is_empty() || s.t60.is_empty() || s.smd.is_empty() || s.seeds_per_doa == 0 {
            return fail("scene grid needs at least one room, T60, SMD and seed".into());
        }
        for &dims in &s.rooms {
            for &t60 in &s.t60 {
                RoomSpec {
                    dimensions: dims,
                    t60,
                }
                .validate()?;
            }
        }
        if self.target_doas()?.is_empty() {
            return fail("no target DOAs left after doa_range".into());
        }
        if s.sir_db[0] > s.sir_db[1] || s.snr_db.is_some_and(|r| r[0] > r[1]) {
            return fail("SIR/SNR ranges must be [low, high]".into());
        }
        if s.duration_frames == 0 {
            return fail("duration_frames must be >= 1".into());
        }
        self.stft.validate()?;
        self.array.to_geometry()?;
        Ok(())
    }

    /// Full validation for running the experiment.
    pub fn validate(&self) -> Result<()> {
        self.validate_scenes()?;
        let fail = |msg: String| Err(Error::Config(msg));
        let s = &self.scenes;
        if self.methods.is_empty() {
            return fail("method list is empty".into());
        }
        if self.masks.is_empty() {
            return fail("mask list is empty".into());
        }
        if self.eval_frames.is_empty() {
            return fail("eval_frames is empty".into());
        }
        if let Some(&n) = self
            .eval_frames
            .iter()
            .find(|&&n| n == 0 || n > s.duration_frames)
        {
            return fail(format!(
                "eval window of {n} frames does not fit {} frames",
                s.duration_frames
            ));
        }
        DoaGrid::uniform(self.grid_size)?;
        if self.oracle_channel >= self.array.num_mics {
            return fail(format!(
                "oracle_channel {} out of range",
                self.oracle_channel
            ));
        }
        let bins = self.stft.num_bins();
        for m in &self.masks {
            match *m {
                MaskKind::RandomBands(n) if n > bins => {
                    return fail(format!("random-bands:{n} exceeds {bins} bins"))
                }
                MaskKind::BandRange(lo, hi) if lo >= hi || hi > bins => {
                    return fail(format!("band-range:{lo}:{hi} invalid for {bins} bins"))
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn target_doas(&self) -> Result<Vec<f64>> {
        let all = self.scenes.doas.angles()?;
        Ok(match self.scenes.doa_range {
            Some([lo, hi]) => all.into_iter().filter(|a| (lo..=hi).contains(a)).collect(),
            None => all,
        })
    }

    /// Number of scenes the grid expands to.
    pub fn num_scenes(&self) -> Result<usize> {
        let s = &self.scenes;
        Ok(s.rooms.len() * s.t60.len() * s.smd.len() * self.target_doas()?.len() * s.seeds_per_doa)
    }
}

#[derive(Debug, Clone, Copy)]
struct SceneJob {
    id: usize,
    room: usize,
    t60: f64,
    smd: f64,
    doa: f64,
}

fn expand(config: &ExperimentConfig) -> Result<Vec<SceneJob>> {
    let s = &config.scenes;
    let doas = config.target_doas()?;
    let mut jobs = Vec::new();
    for room in 0..s.rooms.len() {
        for &t60 in &s.t60 {
            for &smd in &s.smd {
                for &doa in &doas {
                    for _ in 0..s.seeds_per_doa {
                        jobs.push(SceneJob {
                            id: jobs.len(),
                            room,
                            t60,
                            smd,
                            doa,
                        });
                    }
                }
            }
        }
    }
    Ok(jobs)
}

fn draw(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

struct SceneInputs {
    mixture: Spectrogram,
    direct: Spectrogram,
    mask_seed: u64,
}

fn build_mask(
    kind: MaskKind,
    inputs: &SceneInputs,
    channel: usize,
) -> Result<Option<AttentionMask>> {
    let (k, n) = (inputs.mixture.num_bins(), inputs.mixture.num_frames());
    Ok(match kind {
        MaskKind::None => None,
        MaskKind::OraclePsm => Some(psm_mask(&inputs.direct, &inputs.mixture, channel)?),
        MaskKind::OracleRatio => Some(magnitude_ratio_mask(
            &inputs.direct,
            &inputs.mixture,
            channel,
        )?),
        MaskKind::OracleRatioBin(t) => Some(binarize(
            &magnitude_ratio_mask(&inputs.direct, &inputs.mixture, channel)?,
            t,
        )?),
        MaskKind::RandomBands(b) => Some(random_band_mask(k, n, b, inputs.mask_seed)?),
        MaskKind::BandRange(lo, hi) => Some(band_range_mask(k, n, lo, hi)?),
    })
}

/// A fully specified scene of the grid plus the draws that are not part of
/// the simulation itself.
#[derive(Debug, Clone, PartialEq)]
pub struct GridScene {
    pub id: usize,
    pub room: usize,
    pub spec: SceneSpec,
    pub interferer_doa: Option<f64>,
    pub mask_seed: u64,
}

fn grid_scene(config: &ExperimentConfig, all_doas: &[f64], job: SceneJob) -> Result<GridScene> {
    let s = &config.scenes;
    let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
    rng.set_stream(job.id as u64);
    let seed: u64 = rng.gen();
    let sir = draw(&mut rng, s.sir_db);
    let snr = s.snr_db.map(|r| draw(&mut rng, r));
    let mut sources = vec![SourceSpec {
        doa: job.doa,
        smd: job.smd,
        signal: s.target.clone(),
    }];
    let mut interferer_doa = None;
    if let Some(signal) = &s.interferer {
        let candidates: Vec<f64> = all_doas
            .iter()
            .cloned()
            .filter(|a| (a - job.doa).abs() >= s.min_separation_deg)
            .collect();
        if candidates.is_empty() {
            return Err(Error::Config(format!(
                "no interferer DOA at least {}° from {}",
                s.min_separation_deg, job.doa
            )));
        }
        let doa = candidates[rng.gen_range(0..candidates.len())];
        interferer_doa = Some(doa);
        sources.push(SourceSpec {
            doa,
            smd: job.smd,
            signal: signal.clone(),
        });
    }
    let mask_seed: u64 = rng.gen();
    Ok(GridScene {
        id: job.id,
        room: job.room,
        spec: SceneSpec {
            room: RoomSpec {
                dimensions: s.rooms[job.room],
                t60: job.t60,
            },
            array: config.array,
            sources,
            snr_db: snr,
            sir_db: sir,
            seed,
            duration_frames: s.duration_frames,
            sample_rate: config.sample_rate,
            stft: config.stft,
            propagation: s.propagation,
            wall_margin_m: s.wall_margin_m,
        },
        interferer_doa,
        mask_seed,
    })
}

/// Expands the scene grid into scene specs, in scene-id order.
pub fn grid_scenes(config: &ExperimentConfig) -> Result<Vec<GridScene>> {
    config.validate_scenes()?;
    let all_doas = config.scenes.doas.angles()?;
    expand(config)?
        .into_iter()
        .map(|job| grid_scene(config, &all_doas, job))
        .collect()
}

fn run_scene(
    config: &ExperimentConfig,
    estimator: &Estimator,
    all_doas: &[f64],
    job: SceneJob,
) -> Result<Vec<EvalRecord>> {
    let GridScene {
        spec,
        interferer_doa,
        mask_seed,
        ..
    } = grid_scene(config, all_doas, job)?;
    let sir = spec.sir_db;
    let snr = spec.snr_db;
    let truth = mix_scene(&spec)?;
    let inputs = SceneInputs {
        mixture: stft(&truth.mixture, &config.stft)?,
        direct: stft(&truth.direct[0], &config.stft)?,
        mask_seed,
    };
    let mut masks = Vec::new();
    for &kind in &config.masks {
        masks.push((kind, build_mask(kind, &inputs, config.oracle_channel)?));
    }

    let total = inputs.mixture.num_frames();
    let mut records = Vec::new();
    for &ne in &config.eval_frames {
        let start = (total - ne) / 2;
        let frames = start..start + ne;
        let clean = estimator.srp_phat(&inputs.direct, frames.clone())?;
        let mut emit =
            |method: Method, mask_kind: MaskKind, mask: Option<&AttentionMask>| -> Result<()> {
                let sps = estimator.estimate(method, &inputs.mixture, mask, frames.clone())?;
                let est = estimator.pick(&sps)?;
                records.push(EvalRecord {
                    scene_id: job.id,
                    room: job.room,
                    t60: job.t60,
                    smd: job.smd,
                    true_doa: job.doa,
                    interferer_doa,
                    sir_db: interferer_doa.map(|_| sir),
                    snr_db: snr,
                    method,
                    mask: mask_kind.to_string(),
                    frames_used: ne,
                    est_doa: est,
                    ae: super::absolute_error(job.doa, est)?,
                    sps_loss: sps_loss(&sps, &clean)?,
                });
                Ok(())
            };
        for &method in &config.methods {
            if method.uses_mask() {
                for (kind, mask) in &masks {
                    emit(method, *kind, mask.as_ref())?;
                }
            } else {
                emit(method, MaskKind::None, None)?;
            }
        }
    }
    Ok(records)
}

/// Metrics for one (method, mask, window length) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub method: Method,
    pub mask: String,
    pub frames_used: usize,
    #[serde(flatten)]
    pub report: EvalReport,
    pub mean_sps_loss: f64,
    /// The same metrics restricted to each T60, keyed by its decimal form.
    pub by_t60: BTreeMap<String, EvalReport>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    /// Sorted by scene, method, mask and window length.
    pub records: Vec<EvalRecord>,
    pub groups: Vec<GroupReport>,
}

type GroupKey = (Method, String, usize);

fn group_key(r: &EvalRecord) -> GroupKey {
    (r.method, r.mask.clone(), r.frames_used)
}

fn grouped(records: &[EvalRecord]) -> BTreeMap<GroupKey, Vec<EvalRecord>> {
    let mut groups: BTreeMap<GroupKey, Vec<EvalRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(group_key(r)).or_default().push(r.clone());
    }
    groups
}

/// Simulates every scene of the grid and evaluates every method/mask pair on
/// it, using at most `jobs` worker threads. Results do not depend on `jobs`.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentOutput> {
    config.validate()?;
    let geometry = config.array.to_geometry()?;
    let grid = DoaGrid::uniform(config.grid_size)?;
    let estimator = Estimator::new(
        grid,
        geometry,
        config.sample_rate,
        config.stft.window_length,
        config.estimator,
    )?;
    let all_doas = config.scenes.doas.angles()?;
    let scene_jobs = expand(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let per_scene: Vec<Vec<EvalRecord>> = pool.install(|| {
        scene_jobs
            .par_iter()
            .map(|&job| {
                run_scene(config, &estimator, &all_doas, job).map_err(|e| match e {
                    Error::Config(m) => Error::Config(format!("scene {}: {m}", job.id)),
                    other => other,
                })
            })
            .collect::<Result<_>>()
    })?;
    let mut records: Vec<EvalRecord> = per_scene.into_iter().flatten().collect();
    records.sort_by(|a, b| {
        (a.scene_id, a.method, &a.mask, a.frames_used).cmp(&(
            b.scene_id,
            b.method,
            &b.mask,
            b.frames_used,
        ))
    });

    let mut groups = Vec::new();
    for ((method, mask, frames_used), recs) in grouped(&records) {
        let report = summarize_with(&recs, config.metrics)?;
        let mut by_t60 = BTreeMap::new();
        for &t60 in &config.scenes.t60 {
            let sub: Vec<EvalRecord> = recs.iter().filter(|r| r.t60 == t60).cloned().collect();
            if !sub.is_empty() {
                by_t60.insert(t60.to_string(), summarize_with(&sub, config.metrics)?);
            }
        }
        groups.push(GroupReport {
            method,
            mask,
            frames_used,
            report,
            mean_sps_loss: recs.iter().map(|r| r.sps_loss).sum::<f64>() / recs.len() as f64,
            by_t60,
        });
    }
    Ok(ExperimentOutput {
        config: config.clone(),
        records,
        groups,
    })
}

#[derive(Serialize)]
struct ReportFile<'a> {
    config: &'a ExperimentConfig,
    num_scenes: usize,
    num_records: usize,
    groups: &'a [GroupReport],
}

#[derive(Serialize)]
struct ConfusionRow<'a> {
    method: Method,
    mask: &'a str,
    frames_used: usize,
    true_doa: f64,
    est_doa: f64,
    count: u64,
}

#[derive(Serialize)]
struct DoaRow<'a> {
    method: Method,
    mask: &'a str,
    frames_used: usize,
    true_doa: f64,
    count: usize,
    mae: f64,
    acc: f64,
    psacc: f64,
}

fn create(dir: &Path, name: &str) -> Result<csv::Writer<std::fs::File>> {
    let path = dir.join(name);
    let file = std::fs::File::create(&path).map_err(|source| Error::File { path, source })?;
    Ok(csv::Writer::from_writer(file))
}

/// Writes `report.json`, `records.csv`, `confusion.csv` and one
/// `psacc_vs_doa_t60_<T60>.csv` per reverberation time into `dir`.
pub fn write_outputs(dir: &Path, output: &ExperimentOutput) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|source| Error::File {
        path: dir.to_path_buf(),
        source,
    })?;
    let config = &output.config;
    let mut written = Vec::new();

    let report = ReportFile {
        config,
        num_scenes: config.num_scenes()?,
        num_records: output.records.len(),
        groups: &output.groups,
    };
    let path = dir.join("report.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n").map_err(|source| {
        Error::File {
            path: path.clone(),
            source,
        }
    })?;
    written.push(path);

    let mut w = create(dir, "records.csv")?;
    for r in &output.records {
        w.serialize(r)?;
    }
    w.flush()?;
    written.push(dir.join("records.csv"));

    let grid = DoaGrid::uniform(config.grid_size)?;
    let groups = grouped(&output.records);
    let mut w = create(dir, "confusion.csv")?;
    for ((method, mask, frames_used), recs) in &groups {
        let m = confusion_matrix(recs, &grid);
        for ((t, e), &count) in m.counts.indexed_iter() {
            w.serialize(ConfusionRow {
                method: *method,
                mask,
                frames_used: *frames_used,
                true_doa: grid.angle(t),
                est_doa: grid.angle(e),
                count,
            })?;
        }
    }
    w.flush()?;
    written.push(dir.join("confusion.csv"));

    for &t60 in &config.scenes.t60 {
        let name = format!("psacc_vs_doa_t60_{t60}.csv");
        let mut w = create(dir, &name)?;
        for ((method, mask, frames_used), recs) in &groups {
            let mut by_doa: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
            let mut doas: BTreeMap<u64, f64> = BTreeMap::new();
            for r in recs.iter().filter(|r| r.t60 == t60) {
                // bit patterns of non-negative floats sort like the values
                by_doa.entry(r.true_doa.to_bits()).or_default().push(r.ae);
                doas.insert(r.true_doa.to_bits(), r.true_doa);
            }
            for (bits, errors) in &by_doa {
                let rep = super::summarize_errors(errors, config.metrics)?;
                w.serialize(DoaRow {
                    method: *method,
                    mask,
                    frames_used: *frames_used,
                    true_doa: doas[bits],
                    count: rep.count,
                    mae: rep.mae,
                    acc: rep.acc,
                    psacc: rep.psacc,
                })?;
            }
        }
        w.flush()?;
        written.push(dir.join(name));
    }
    Ok(written)
}
