//! Directory-based frame logs.
//!
//! A dataset directory holds `poses.csv` with header
//! `timestamp,tx,ty,tz,qx,qy,qz,qw` and one `cloud_<row>.csv` per pose row
//! with header `x,y,z` (sensor frame, meters). Row numbering starts at 0.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use esdfmap::nalgebra::{Point3, Quaternion, UnitQuaternion, Vector3};
use esdfmap::{Pose, SensorFrame};
use serde::Deserialize;

use crate::error::{ReplayError, Result};

const POSE_HEADER: [&str; 8] = ["timestamp", "tx", "ty", "tz", "qx", "qy", "qz", "qw"];
const CLOUD_HEADER: [&str; 3] = ["x", "y", "z"];

#[derive(Clone, Copy, Debug, Deserialize)]
struct PoseRow {
    timestamp: f64,
    tx: f64,
    ty: f64,
    tz: f64,
    qx: f64,
    qy: f64,
    qz: f64,
    qw: f64,
}

#[derive(Clone, Copy, Debug, Deserialize)]
struct PointRow {
    x: f64,
    y: f64,
    z: f64,
}

fn csv_error(path: &Path, e: csv::Error) -> ReplayError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => ReplayError::io(path, io),
        kind => ReplayError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

fn open_csv(path: &Path, header: &[&str]) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| ReplayError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let found = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(ReplayError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!(
                "expected header '{}', found '{}'",
                header.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    Ok(reader)
}

/// Streaming reader over a dataset directory.
///
/// Poses are parsed up front; clouds are read lazily, one per yielded frame.
#[derive(Debug)]
pub struct DatasetReader {
    dir: PathBuf,
    poses: Vec<(usize, PoseRow)>,
    cursor: usize,
    warnings: usize,
}

impl DatasetReader {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        if !dir.is_dir() {
            return Err(ReplayError::Config(format!(
                "dataset directory {} does not exist",
                dir.display()
            )));
        }
        let path = dir.join("poses.csv");
        let mut reader = open_csv(&path, &POSE_HEADER)?;
        let mut poses = Vec::new();
        let mut last = f64::NEG_INFINITY;
        for (row, rec) in reader.deserialize::<PoseRow>().enumerate() {
            let rec = rec.map_err(|e| csv_error(&path, e))?;
            if rec.timestamp < last {
                return Err(ReplayError::Data(format!(
                    "{}: timestamp {} at row {row} precedes {last}",
                    path.display(),
                    rec.timestamp
                )));
            }
            last = rec.timestamp;
            poses.push((row, rec));
        }
        Ok(Self {
            dir,
            poses,
            cursor: 0,
            warnings: 0,
        })
    }

    /// Pose rows in the file.
    pub fn pose_count(&self) -> usize {
        self.poses.len()
    }

    /// Pose rows skipped because their cloud file is missing.
    pub fn warnings(&self) -> usize {
        self.warnings
    }

    fn read_frame(&self, row: usize, pose: &PoseRow) -> Result<SensorFrame> {
        let path = self.dir.join(format!("cloud_{row}.csv"));
        let mut reader = open_csv(&path, &CLOUD_HEADER)?;
        let points = reader
            .deserialize::<PointRow>()
            .map(|r| r.map(|p| Point3::new(p.x, p.y, p.z)).map_err(|e| csv_error(&path, e)))
            .collect::<Result<Vec<_>>>()?;
        let q = Quaternion::new(pose.qw, pose.qx, pose.qy, pose.qz);
        let frame = SensorFrame {
            timestamp: pose.timestamp,
            pose: Pose {
                translation: Vector3::new(pose.tx, pose.ty, pose.tz),
                rotation: UnitQuaternion::new_unchecked(q),
            },
            points,
        };
        frame
            .validate()
            .map_err(|e| ReplayError::Data(format!("{} row {row}: {e}", self.dir.join("poses.csv").display())))?;
        Ok(frame)
    }
}

impl Iterator for DatasetReader {
    type Item = Result<SensorFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        while let Some(&(row, pose)) = self.poses.get(self.cursor) {
            self.cursor += 1;
            if !self.dir.join(format!("cloud_{row}.csv")).is_file() {
                log::warn!("pose row {row} has no cloud file; skipped");
                self.warnings += 1;
                continue;
            }
            return Some(self.read_frame(row, &pose));
        }
        None
    }
}

/// Reads a whole dataset; returns the frames and the missing-cloud count.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<(Vec<SensorFrame>, usize)> {
    let mut reader = DatasetReader::open(dir)?;
    let frames = reader.by_ref().collect::<Result<Vec<_>>>()?;
    Ok((frames, reader.warnings()))
}

/// Writes frames in dataset layout, one cloud file per frame.
pub fn write_dataset(dir: impl AsRef<Path>, frames: &[SensorFrame]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| ReplayError::io(dir, e))?;
    let path = dir.join("poses.csv");
    let mut poses = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
    poses.write_record(POSE_HEADER).map_err(|e| csv_error(&path, e))?;
    for (row, f) in frames.iter().enumerate() {
        let t = &f.pose.translation;
        let q = f.pose.rotation.quaternion();
        let fields = [f.timestamp, t.x, t.y, t.z, q.i, q.j, q.k, q.w].map(|v| v.to_string());
        poses.write_record(&fields).map_err(|e| csv_error(&path, e))?;

        let cloud_path = dir.join(format!("cloud_{row}.csv"));
        let file = File::create(&cloud_path).map_err(|e| ReplayError::io(&cloud_path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| ReplayError::io(&cloud_path, e);
        writeln!(w, "x,y,z").map_err(io)?;
        for p in &f.points {
            writeln!(w, "{},{},{}", p.x, p.y, p.z).map_err(io)?;
        }
        w.flush().map_err(io)?;
    }
    poses.flush().map_err(|e| ReplayError::io(&path, e))?;
    Ok(())
}
