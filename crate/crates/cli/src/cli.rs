//! Command-line front end.
//!
//! Any `--section.key value` (or `--section.key=value`) argument overrides the
//! matching configuration-file key.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{RunConfig, SliceRequest};
use crate::dataset::write_dataset;
use crate::error::{ReplayError, Result};
use crate::replay::{run, Source, SweepKind};
use crate::scenario::{generate_scenario, ScenarioSpec};

#[derive(Debug, Parser)]
#[command(
    name = "esdfmap",
    version,
    about = "Incremental distance-field replay and benchmarks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replay a dataset or scenario and write results.csv, stats.json and slices.
    Run(RunArgs),
    /// Write a scenario's frames as a dataset directory.
    Generate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub sweep: Option<SweepKind>,
    /// `axis=z,index=K`; may be repeated.
    #[arg(long)]
    pub slice: Vec<SliceRequest>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Splits `--section.key value` overrides out of `args`.
pub fn extract_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>)> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(name) = arg
            .strip_prefix("--")
            .filter(|n| n.split('=').next().is_some_and(|k| k.contains('.')))
        else {
            rest.push(arg);
            continue;
        };
        if let Some((k, v)) = name.split_once('=') {
            overrides.push((k.to_string(), v.to_string()));
        } else {
            let v = it
                .next()
                .ok_or_else(|| ReplayError::Config(format!("--{name} needs a value")))?;
            overrides.push((name.to_string(), v));
        }
    }
    Ok((rest, overrides))
}

fn execute(cli: Cli, overrides: &[(String, String)]) -> Result<()> {
    match cli.command {
        Command::Generate { scenario, out } => {
            let spec = ScenarioSpec::load(&scenario)?;
            let frames: Vec<_> = generate_scenario(&spec)?.collect();
            write_dataset(&out, &frames)
        }
        Command::Run(args) => {
            let mut config = match &args.config {
                Some(p) => RunConfig::load(p)?,
                None => RunConfig::default(),
            };
            for (k, v) in overrides {
                config.set(k, v)?;
            }
            config.slices.extend(args.slice.iter().copied());
            if let Some(out) = args.out {
                config.out_dir = out;
            }
            let source = match (args.dataset, args.scenario) {
                (Some(d), _) => Source::Dataset(d),
                (None, Some(s)) => Source::Scenario(ScenarioSpec::load(&s)?),
                (None, None) => return Err(ReplayError::Config("need --dataset or --scenario".into())),
            };
            let output = run(&config, &source, args.sweep)?;
            log::info!("{} run(s) written to {}", output.rows.len(), output.out_dir.display());
            Ok(())
        }
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args(args: Vec<String>) -> i32 {
    let (rest, overrides) = match extract_overrides(args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(rest) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli, &overrides) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
