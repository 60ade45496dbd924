//! Frame replay, parameter sweeps and artifact output.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Duration;

use esdfmap::oracle::{evaluate, ErrorReport};
use esdfmap::{
    Backend, Connectivity, EpochReport, EsdfMap, IndexConfig, MapConfig, MemoryStats, SensorFrame, Slice, UpdateRule,
    VoxelBox, VoxelKey,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::dataset::DatasetReader;
use crate::error::{ReplayError, Result};
use crate::scenario::{generate_scenario, ScenarioFrames, ScenarioSpec};

/// Drives one map through a frame stream with a dataset-time epoch cadence.
///
/// Frames may be fed in any number of sessions; the final state depends
/// only on the frame sequence.
#[derive(Clone, Debug)]
pub struct Replay {
    map: EsdfMap,
    update_period: f64,
    anchor: Option<f64>,
    frames: usize,
    epochs: Vec<EpochRecord>,
    per_epoch_error: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub report: EpochReport,
    pub error: Option<ErrorReport>,
}

impl Replay {
    pub fn new(config: MapConfig, update_period: f64) -> Result<Self> {
        Ok(Self {
            map: EsdfMap::new(config)?,
            update_period,
            anchor: None,
            frames: 0,
            epochs: Vec::new(),
            per_epoch_error: false,
        })
    }

    pub fn with_per_epoch_error(mut self, enabled: bool) -> Self {
        self.per_epoch_error = enabled;
        self
    }

    pub fn map(&self) -> &EsdfMap {
        &self.map
    }

    pub fn into_map(self) -> EsdfMap {
        self.map
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn epochs(&self) -> &[EpochRecord] {
        &self.epochs
    }

    /// Integrates one frame and runs an epoch once `update_period` of
    /// dataset time has elapsed since the last one.
    pub fn feed(&mut self, frame: &SensorFrame) -> Result<Option<EpochReport>> {
        self.map.integrate_frame(frame)?;
        self.frames += 1;
        let anchor = *self.anchor.get_or_insert(frame.timestamp);
        if frame.timestamp - anchor >= self.update_period {
            self.anchor = Some(frame.timestamp);
            return self.epoch().map(Some);
        }
        Ok(None)
    }

    /// Runs a final epoch if any change is still pending.
    pub fn finish(&mut self) -> Result<Option<EpochReport>> {
        if self.map.has_pending_changes() {
            return self.epoch().map(Some);
        }
        Ok(None)
    }

    fn epoch(&mut self) -> Result<EpochReport> {
        let report = self.map.run_epoch()?;
        let error = self.per_epoch_error.then(|| evaluate(&self.map));
        self.epochs.push(EpochRecord {
            report: report.clone(),
            error,
        });
        Ok(report)
    }
}

/// Parameter swept across runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepKind {
    Connectivity,
    #[value(name = "block_size", alias = "block-size")]
    BlockSize,
    Rule,
}

pub const SWEEP_BLOCK_SIZES: [u32; 5] = [1, 2, 4, 8, 16];

/// One configured run of a sweep. `dense_from_extent` sizes a dense index
/// from the observed extent of an earlier run.
#[derive(Clone, Debug)]
struct Variant {
    label: String,
    config: MapConfig,
    dense_from_extent: bool,
}

fn variants(base: &MapConfig, sweep: Option<SweepKind>) -> Vec<Variant> {
    let single = |label: &str, config: MapConfig| Variant {
        label: label.to_string(),
        config,
        dense_from_extent: false,
    };
    match sweep {
        None => vec![single("", base.clone())],
        Some(SweepKind::Connectivity) => Connectivity::ALL
            .iter()
            .map(|&c| {
                let mut cfg = base.clone();
                cfg.esdf.connectivity = c;
                single(&c.to_string(), cfg)
            })
            .collect(),
        Some(SweepKind::Rule) => [UpdateRule::EuclideanClosestObstacle, UpdateRule::QuasiEuclidean]
            .iter()
            .map(|&r| {
                let mut cfg = base.clone();
                cfg.esdf.update_rule = r;
                single(&r.to_string(), cfg)
            })
            .collect(),
        Some(SweepKind::BlockSize) => {
            let mut out: Vec<Variant> = SWEEP_BLOCK_SIZES
                .iter()
                .map(|&bs| {
                    let mut cfg = base.clone();
                    cfg.index = IndexConfig::hashed(bs);
                    single(&format!("bs{bs}"), cfg)
                })
                .collect();
            let mut dense = base.clone();
            dense.index.backend = Backend::DenseArray;
            out.push(Variant {
                label: "dense".into(),
                dense_from_extent: dense.index.bounds.is_none(),
                config: dense,
            });
            out
        }
    }
}

/// Half-open box around `keys`, padded by one voxel.
pub fn bounding_box(keys: &[VoxelKey]) -> Option<VoxelBox> {
    let first = *keys.first()?;
    let (mut lo, mut hi) = (first, first);
    for k in keys {
        lo = VoxelKey::new(lo.x.min(k.x), lo.y.min(k.y), lo.z.min(k.z));
        hi = VoxelKey::new(hi.x.max(k.x), hi.y.max(k.y), hi.z.max(k.z));
    }
    Some(VoxelBox::new(lo - VoxelKey::new(1, 1, 1), hi + VoxelKey::new(2, 2, 2)))
}

/// One line of `results.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub scenario_id: String,
    pub connectivity: Connectivity,
    pub rule: UpdateRule,
    /// Block size, or `dense`.
    pub block_size: String,
    pub error: ErrorReport,
    pub wall_time_ms: f64,
}

pub const RESULTS_HEADER: [&str; 8] = [
    "scenario_id",
    "connectivity",
    "rule",
    "block_size",
    "rms",
    "max",
    "count",
    "wall_time_ms",
];

impl ResultRow {
    /// CSV fields; `rms` and `max` read `empty` when nothing was compared.
    pub fn fields(&self) -> [String; 8] {
        let (rms, max) = if self.error.is_empty() {
            ("empty".to_string(), "empty".to_string())
        } else {
            (
                self.error.rms_error_voxels.to_string(),
                self.error.max_error_voxels.to_string(),
            )
        };
        [
            self.scenario_id.clone(),
            self.connectivity.to_string(),
            self.rule.to_string(),
            self.block_size.clone(),
            rms,
            max,
            self.error.compared_voxel_count.to_string(),
            format!("{:.3}", self.wall_time_ms),
        ]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TimeSummary {
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p90_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

impl TimeSummary {
    pub fn from_durations(times: &[Duration]) -> Self {
        if times.is_empty() {
            return Self::default();
        }
        let mut ms: Vec<f64> = times.iter().map(|d| d.as_secs_f64() * 1e3).collect();
        ms.sort_by(f64::total_cmp);
        let pct = |p: f64| ms[((p * (ms.len() - 1) as f64).round() as usize).min(ms.len() - 1)];
        Self {
            mean_ms: ms.iter().sum::<f64>() / ms.len() as f64,
            median_ms: pct(0.5),
            p90_ms: pct(0.9),
            p99_ms: pct(0.99),
            max_ms: *ms.last().unwrap_or(&0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorSummary {
    pub empty: bool,
    pub rms_voxels: f64,
    pub max_voxels: f64,
    pub min_signed_voxels: f64,
    pub compared: usize,
    pub excluded: usize,
}

impl From<&ErrorReport> for ErrorSummary {
    fn from(r: &ErrorReport) -> Self {
        Self {
            empty: r.is_empty(),
            rms_voxels: r.rms_error_voxels,
            max_voxels: r.max_error_voxels,
            min_signed_voxels: r.min_signed_error_voxels,
            compared: r.compared_voxel_count,
            excluded: r.excluded_voxel_count,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MemorySummary {
    pub allocated_voxel_records: usize,
    pub allocated_blocks: usize,
}

impl From<MemoryStats> for MemorySummary {
    fn from(m: MemoryStats) -> Self {
        Self {
            allocated_voxel_records: m.allocated_voxel_records,
            allocated_blocks: m.allocated_blocks,
        }
    }
}

/// One entry of `stats.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunStats {
    pub label: String,
    pub scenario_id: String,
    pub connectivity: String,
    pub rule: String,
    pub block_size: String,
    pub frames: usize,
    pub skipped_frames: usize,
    pub epochs: usize,
    pub epoch_time: TimeSummary,
    pub k_initialized_total: usize,
    pub n_expanded_total: usize,
    pub pops_total: usize,
    pub m_observed: usize,
    pub memory: MemorySummary,
    pub error: ErrorSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_epoch_error: Option<Vec<ErrorSummary>>,
}

/// Everything one run produced.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub row: ResultRow,
    pub stats: RunStats,
    pub map: EsdfMap,
}

/// Frame input for [`run`].
#[derive(Clone, Debug)]
pub enum Source {
    Dataset(PathBuf),
    Scenario(ScenarioSpec),
}

impl Source {
    fn default_id(&self) -> String {
        match self {
            Source::Dataset(p) => p
                .file_name()
                .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned()),
            Source::Scenario(s) => s.id.clone().unwrap_or_else(|| format!("scenario{}", s.seed)),
        }
    }

    fn open(&self) -> Result<FrameStream> {
        Ok(match self {
            Source::Dataset(dir) => FrameStream::Dataset(DatasetReader::open(dir)?),
            Source::Scenario(spec) => FrameStream::Scenario(generate_scenario(spec)?),
        })
    }
}

enum FrameStream {
    Dataset(DatasetReader),
    Scenario(ScenarioFrames),
}

impl FrameStream {
    fn warnings(&self) -> usize {
        match self {
            FrameStream::Dataset(r) => r.warnings(),
            FrameStream::Scenario(_) => 0,
        }
    }
}

impl Iterator for FrameStream {
    type Item = Result<SensorFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            FrameStream::Dataset(r) => r.next(),
            FrameStream::Scenario(s) => s.next().map(Ok),
        }
    }
}

/// Replays `frames` under one map configuration and evaluates the result.
pub fn run_frames(
    config: &MapConfig,
    update_period: f64,
    per_epoch_error: bool,
    frames: impl IntoIterator<Item = Result<SensorFrame>>,
    scenario_id: &str,
    label: &str,
) -> Result<RunResult> {
    let mut replay = Replay::new(config.clone(), update_period)?.with_per_epoch_error(per_epoch_error);
    for frame in frames {
        replay.feed(&frame?)?;
    }
    replay.finish()?;
    Ok(summarize(replay, scenario_id, label, 0))
}

fn summarize(replay: Replay, scenario_id: &str, label: &str, skipped: usize) -> RunResult {
    let error = evaluate(replay.map());
    let map_cfg = replay.map().esdf_config().clone();
    let index = replay.map().store().index().config().clone();
    let block_size = match index.backend {
        Backend::DenseArray => "dense".to_string(),
        Backend::HashedBlocks => index.block_size.to_string(),
    };
    let times: Vec<Duration> = replay.epochs.iter().map(|e| e.report.wall_time).collect();
    let sum = |f: fn(&EpochReport) -> usize| replay.epochs.iter().map(|e| f(&e.report)).sum::<usize>();
    let per_epoch_error = replay.per_epoch_error.then(|| {
        replay
            .epochs
            .iter()
            .filter_map(|e| e.error.as_ref().map(ErrorSummary::from))
            .collect()
    });
    let stats = RunStats {
        label: label.to_string(),
        scenario_id: scenario_id.to_string(),
        connectivity: map_cfg.connectivity.to_string(),
        rule: map_cfg.update_rule.to_string(),
        block_size: block_size.clone(),
        frames: replay.frames,
        skipped_frames: skipped,
        epochs: replay.epochs.len(),
        epoch_time: TimeSummary::from_durations(&times),
        k_initialized_total: sum(|r| r.k_initialized),
        n_expanded_total: sum(|r| r.n_expanded),
        pops_total: sum(|r| r.pops),
        m_observed: replay.map().observed_count(),
        memory: replay.map().memory_stats().into(),
        error: ErrorSummary::from(&error),
        per_epoch_error,
    };
    let row = ResultRow {
        scenario_id: scenario_id.to_string(),
        connectivity: map_cfg.connectivity,
        rule: map_cfg.update_rule,
        block_size,
        error,
        wall_time_ms: times.iter().map(|d| d.as_secs_f64() * 1e3).sum(),
    };
    RunResult {
        row,
        stats,
        map: replay.into_map(),
    }
}

/// Summary of a completed [`run`].
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub stats: Vec<RunStats>,
    pub out_dir: PathBuf,
}

/// Runs every sweep variant over `source` and writes `results.csv`,
/// `stats.json` and the requested slices to `config.out_dir`.
///
/// On failure, artifacts of the runs completed so far are still written.
pub fn run(config: &RunConfig, source: &Source, sweep: Option<SweepKind>) -> Result<RunOutput> {
    config.validate()?;
    if let Source::Scenario(spec) = source {
        spec.validate()?;
    }
    let out_dir = config.out_dir.clone();
    std::fs::create_dir_all(&out_dir).map_err(|e| ReplayError::io(&out_dir, e))?;
    let scenario_id = config.scenario_id.clone().unwrap_or_else(|| source.default_id());

    let mut rows = Vec::new();
    let mut stats = Vec::new();
    let mut extent: Option<VoxelBox> = None;
    let outcome = (|| -> Result<()> {
        for v in variants(&config.map, sweep) {
            let mut map_cfg = v.config.clone();
            if v.dense_from_extent {
                let Some(bounds) = extent else {
                    log::warn!("no observed extent available; skipping dense run");
                    continue;
                };
                map_cfg.index = IndexConfig::dense(bounds);
            }
            let mut frames = source.open()?;
            let mut replay = Replay::new(map_cfg, config.update_period)?.with_per_epoch_error(config.per_epoch_error);
            for frame in frames.by_ref() {
                replay.feed(&frame?)?;
            }
            replay.finish()?;
            let result = summarize(replay, &scenario_id, &v.label, frames.warnings());
            log::info!(
                "{} {}: rms {} over {} voxels",
                scenario_id,
                if v.label.is_empty() { "run" } else { &v.label },
                result.row.error.rms_error_voxels,
                result.row.error.compared_voxel_count
            );
            extent = extent.or_else(|| bounding_box(&result.map.observed_keys()));
            let suffix = if v.label.is_empty() {
                String::new()
            } else {
                format!("_{}", v.label)
            };
            write_slices(&result.map, config, &suffix)?;
            rows.push(result.row);
            stats.push(result.stats);
        }
        Ok(())
    })();
    write_results(&out_dir.join("results.csv"), &rows)?;
    write_stats(&out_dir.join("stats.json"), &stats)?;
    outcome?;
    Ok(RunOutput { rows, stats, out_dir })
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let csv_err = |e: csv::Error| ReplayError::Data(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(RESULTS_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record(r.fields()).map_err(csv_err)?;
    }
    w.flush().map_err(|e| ReplayError::io(path, e))
}

pub fn write_stats(path: &Path, stats: &[RunStats]) -> Result<()> {
    let file = File::create(path).map_err(|e| ReplayError::io(path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), stats)
        .map_err(|e| ReplayError::Data(format!("{}: {e}", path.display())))
}

fn write_slices(map: &EsdfMap, config: &RunConfig, suffix: &str) -> Result<()> {
    if config.slices.is_empty() {
        return Ok(());
    }
    let Some(region) = bounding_box(&map.observed_keys()) else {
        log::warn!("map is empty; no slices written");
        return Ok(());
    };
    for req in &config.slices {
        let slice = Slice::extract(map, req.axis, req.index, region);
        let stem = format!("slice_{}_{}{}", req.axis, req.index, suffix);
        let csv_path = config.out_dir.join(format!("{stem}.csv"));
        let pgm_path = config.out_dir.join(format!("{stem}.pgm"));
        let f = File::create(&csv_path).map_err(|e| ReplayError::io(&csv_path, e))?;
        slice
            .write_csv(BufWriter::new(f))
            .map_err(|e| ReplayError::io(&csv_path, e))?;
        let f = File::create(&pgm_path).map_err(|e| ReplayError::io(&pgm_path, e))?;
        slice
            .write_pgm(BufWriter::new(f), config.slice_max_distance)
            .map_err(|e| ReplayError::io(&pgm_path, e))?;
    }
    Ok(())
}
