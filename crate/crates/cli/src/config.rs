//! Flat `section.key = value` run configuration.
//!
//! ```text
//! # comments and blank lines are ignored
//! index.backend = hashed        # hashed | dense
//! index.block_size = 8
//! index.bounds = -64,-64,-16,64,64,16   # dense only, half-open voxel box
//! occupancy.voxel_size = 0.1
//! esdf.connectivity = C24
//! esdf.rule = euclidean         # euclidean | quasi
//! esdf.queue = fifo             # fifo | priority
//! esdf.signed = false
//! run.update_period = 0.5
//! run.out = results
//! run.slice = axis=z,index=10
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use esdfmap::{Axis, Backend, MapConfig, VoxelBox, VoxelKey};

use crate::error::{ReplayError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SliceRequest {
    pub axis: Axis,
    pub index: i32,
}

impl FromStr for SliceRequest {
    type Err = String;

    /// Parses `axis=z,index=12`.
    fn from_str(s: &str) -> Result<Self, String> {
        let mut axis = None;
        let mut index = None;
        for part in s.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value in slice spec '{s}'"))?;
            match k.trim() {
                "axis" => axis = Some(v.parse::<Axis>()?),
                "index" => index = Some(v.trim().parse::<i32>().map_err(|e| format!("slice index: {e}"))?),
                other => return Err(format!("unknown slice field '{other}'")),
            }
        }
        Ok(SliceRequest {
            axis: axis.ok_or("slice spec needs axis")?,
            index: index.ok_or("slice spec needs index")?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub map: MapConfig,
    /// Dataset seconds between distance-field epochs.
    pub update_period: f64,
    pub out_dir: PathBuf,
    pub slices: Vec<SliceRequest>,
    /// Distance (voxels) mapped to white in PGM slices.
    pub slice_max_distance: f64,
    /// Overrides the id derived from the scenario or dataset name.
    pub scenario_id: Option<String>,
    /// Compute the error report after every epoch, not only at the end.
    pub per_epoch_error: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            map: MapConfig::default(),
            update_period: 0.5,
            out_dir: PathBuf::from("out"),
            slices: Vec::new(),
            slice_max_distance: 20.0,
            scenario_id: None,
            per_epoch_error: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| ReplayError::Config(format!("{key}: cannot parse '{value}': {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(ReplayError::Config(format!("{key}: expected a boolean, got '{value}'"))),
    }
}

fn parse_bounds(key: &str, value: &str) -> Result<VoxelBox> {
    let v: Vec<i32> = value.split(',').map(|c| parse::<i32>(key, c)).collect::<Result<_>>()?;
    if v.len() != 6 {
        return Err(ReplayError::Config(format!("{key}: expected six integers")));
    }
    Ok(VoxelBox::new(
        VoxelKey::new(v[0], v[1], v[2]),
        VoxelKey::new(v[3], v[4], v[5]),
    ))
}

impl RunConfig {
    /// Applies one `section.key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let occ = &mut self.map.occupancy;
        match key.trim() {
            "index.backend" => {
                self.map.index.backend = match value {
                    "hashed" | "hashed_blocks" => Backend::HashedBlocks,
                    "dense" | "array" | "dense_array" => Backend::DenseArray,
                    _ => return Err(ReplayError::Config(format!("{key}: unknown backend '{value}'"))),
                }
            }
            "index.block_size" => self.map.index.block_size = parse(key, value)?,
            "index.bounds" => self.map.index.bounds = Some(parse_bounds(key, value)?),
            "occupancy.voxel_size" => occ.voxel_size = parse(key, value)?,
            "occupancy.log_odds_hit" => occ.log_odds_hit = parse(key, value)?,
            "occupancy.log_odds_miss" => occ.log_odds_miss = parse(key, value)?,
            "occupancy.log_odds_min" => occ.log_odds_min = parse(key, value)?,
            "occupancy.log_odds_max" => occ.log_odds_max = parse(key, value)?,
            "occupancy.occupied_threshold" => occ.occupied_threshold = parse(key, value)?,
            "occupancy.max_ray_range" => occ.max_ray_range = parse(key, value)?,
            "occupancy.deterministic" => occ.deterministic = parse_bool(key, value)?,
            "esdf.connectivity" => self.map.esdf.connectivity = parse(key, value)?,
            "esdf.rule" => self.map.esdf.update_rule = parse(key, value)?,
            "esdf.queue" => self.map.esdf.queue_discipline = parse(key, value)?,
            "esdf.signed" => self.map.esdf.signed_mode = parse_bool(key, value)?,
            "run.update_period" => self.update_period = parse(key, value)?,
            "run.out" => self.out_dir = PathBuf::from(value),
            "run.slice" => {
                for spec in value.split(';').filter(|s| !s.trim().is_empty()) {
                    self.slices.push(parse(key, spec)?);
                }
            }
            "run.slice_max_distance" => self.slice_max_distance = parse(key, value)?,
            "run.scenario_id" => self.scenario_id = Some(value.to_string()),
            "run.per_epoch_error" => self.per_epoch_error = parse_bool(key, value)?,
            other => return Err(ReplayError::Config(format!("unknown configuration key '{other}'"))),
        }
        Ok(())
    }

    pub fn parse_str(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ReplayError::Parse {
                path: origin.to_path_buf(),
                line: i as u64 + 1,
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            cfg.set(k, v).map_err(|e| ReplayError::Parse {
                path: origin.to_path_buf(),
                line: i as u64 + 1,
                message: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ReplayError::io(path, e))?;
        Self::parse_str(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        self.map.index.validate()?;
        self.map.occupancy.validate()?;
        if !(self.update_period >= 0.0) {
            return Err(ReplayError::Config("run.update_period must be non-negative".into()));
        }
        Ok(())
    }
}
