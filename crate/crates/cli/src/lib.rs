//! Replay driver for `esdfmap`: configuration, dataset and scenario input,
//! parameter sweeps and result artifacts.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod replay;
pub mod scenario;

pub use config::{RunConfig, SliceRequest};
pub use dataset::{load_dataset, write_dataset, DatasetReader};
pub use error::{ReplayError, Result};
pub use replay::{run, run_frames, Replay, ResultRow, RunOutput, RunResult, RunStats, Source, SweepKind};
pub use scenario::{generate_scenario, ScenarioFrames, ScenarioSpec};
