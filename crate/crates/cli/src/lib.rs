/*
Copyright 2026 The telebench Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/
//! The `telebench` command line.
//!
//! Exit codes: 0 on success, 1 on runtime errors, 2 on usage errors.

pub mod compare;
pub mod config;

use std::ffi::OsString;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use telebench_core::bench::{replay, run_to_dir, BenchError, BenchmarkSpec, OutputPaths};
use telebench_core::control::ControllerKind;
use telebench_core::metrics::aggregate;
use telebench_core::operator::OperatorKind;
use telebench_core::record::{load, TrialRecord};
use telebench_core::world::Benchmark;
use telebench_server::session::SessionConfig;
use telebench_server::{Server, ServerConfig, DEFAULT_PORT};
use thiserror::Error;

use crate::config::{output_dir, FileConfig, DEFAULT_OUT};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Config(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "telebench", version, about = "Shared-control teleoperation benchmarks")]
pub struct Cli {
    /// JSON configuration file. Flags override its keys.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run benchmark protocols.
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
    /// Recompute report.csv from a records file.
    Report {
        #[arg(long, value_name = "FILE")]
        records: Option<PathBuf>,
        /// Directory for report.csv; defaults to the records file's directory.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Serve live sessions over teleop.v1.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        /// Directory for records of live trials.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Re-simulate one recorded trial and check its events.
    Replay {
        #[arg(long, value_name = "FILE")]
        records: Option<PathBuf>,
        #[arg(long, value_name = "K")]
        trial: Option<usize>,
    },
    /// Compare two records files.
    Compare {
        #[arg(long, value_name = "FILE")]
        a: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        b: Option<PathBuf>,
        /// Also write compare.csv and compare.txt here.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Execute a benchmark and write plan.json, records.jsonl and report.csv.
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// I, II or III.
    #[arg(long)]
    pub benchmark: Option<Benchmark>,
    #[arg(long)]
    pub task: Option<u8>,
    /// baseline or shared.
    #[arg(long)]
    pub controller: Option<ControllerKind>,
    /// ideal-cartesian or shared-follower.
    #[arg(long)]
    pub operator: Option<OperatorKind>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

/// Merges flags over the file into a benchmark spec.
pub fn bench_spec(args: &RunArgs, file: &FileConfig) -> Result<BenchmarkSpec, CliError> {
    let defaults = BenchmarkSpec::default();
    let controller = args.controller.or(file.controller).unwrap_or(defaults.controller);
    let operator = args
        .operator
        .or_else(|| file.operator.as_ref().and_then(|o| o.name()))
        .unwrap_or(match controller {
            ControllerKind::Baseline => OperatorKind::IdealCartesian,
            ControllerKind::Shared => OperatorKind::SharedFollower,
        });
    if operator == OperatorKind::Human {
        return Err(CliError::Usage("human operators run through `telebench serve`".into()));
    }
    let spec = BenchmarkSpec {
        benchmark: args.benchmark.or(file.benchmark).unwrap_or(defaults.benchmark),
        task: args.task.or(file.task).unwrap_or(defaults.task),
        controller,
        operator,
        seed: args.seed.or(file.seed).unwrap_or(defaults.seed),
        classes: file.classes.clone(),
        objects: file.objects.clone(),
        poses: file.poses,
        reps: file.reps,
        scenes: file.scenes,
        t_max: file.t_max,
        gains: file.controllers.unwrap_or(defaults.gains),
        operator_params: file.operator.as_ref().map_or(defaults.operator_params, |o| o.params()),
        align_radius: file.align_radius.unwrap_or(defaults.align_radius),
    };
    spec.validate()?;
    Ok(spec)
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("missing --{flag} (or its config key)")))
}

fn read_records(path: &Path) -> Result<Vec<TrialRecord>, CliError> {
    load(path).map_err(|e| CliError::Runtime(e.to_string()))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

fn bench_run(args: &RunArgs, file: &FileConfig) -> Result<(), CliError> {
    let spec = bench_spec(args, file)?;
    let out = output_dir(args.out.clone(), file.out.clone(), PathBuf::from(DEFAULT_OUT));
    let records = run_to_dir(&spec, &out)?;
    let paths = OutputPaths::in_dir(&out);
    let ok = records.iter().filter(|r| r.is_success()).count();
    println!("{} trials, {ok} successful", records.len());
    println!("wrote {}", paths.plan.display());
    println!("wrote {}", paths.records.display());
    println!("wrote {}", paths.report.display());
    Ok(())
}

fn report(records: Option<PathBuf>, out: Option<PathBuf>, file: &FileConfig) -> Result<(), CliError> {
    let path = required(records.or(file.records.clone()), "records")?;
    let records = read_records(&path)?;
    let csv = aggregate(&records)
        .map_err(|e| CliError::Runtime(e.to_string()))?
        .to_csv();
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let dir = output_dir(out, file.out.clone(), parent.to_path_buf());
    create_dir(&dir)?;
    let target = OutputPaths::in_dir(&dir).report;
    write(&target, &csv)?;
    print!("{csv}");
    eprintln!("wrote {}", target.display());
    Ok(())
}

fn replay_cmd(records: Option<PathBuf>, trial: Option<usize>, file: &FileConfig) -> Result<(), CliError> {
    let path = required(records.or(file.records.clone()), "records")?;
    let k = required(trial.or(file.trial), "trial")?;
    let records = read_records(&path)?;
    let record = records
        .iter()
        .find(|r| r.trial == k)
        .ok_or_else(|| CliError::Runtime(format!("no trial {k} in {}", path.display())))?;
    let result = replay(record).map_err(|e| CliError::Runtime(e.to_string()))?;
    match result.first_divergence {
        None if result.identical => {
            println!("trial {k}: identical, {} events, 0 divergences", record.events.len());
            Ok(())
        }
        Some(i) => Err(CliError::Runtime(format!("trial {k}: diverges at event {i}"))),
        None => Err(CliError::Runtime(format!("trial {k}: record differs outside the event log"))),
    }
}

fn compare_cmd(
    a: Option<PathBuf>,
    b: Option<PathBuf>,
    out: Option<PathBuf>,
    file: &FileConfig,
) -> Result<(), CliError> {
    let a = read_records(&required(a.or(file.a.clone()), "a")?)?;
    let b = read_records(&required(b.or(file.b.clone()), "b")?)?;
    let csv = compare::deltas_csv(&a, &b).map_err(|e| CliError::Runtime(e.to_string()))?;
    let chart = compare::bar_chart(&a, &b);
    print!("{csv}\n{chart}");
    if let Some(dir) = out {
        create_dir(&dir)?;
        write(&dir.join("compare.csv"), &csv)?;
        write(&dir.join("compare.txt"), &chart)?;
    }
    Ok(())
}

fn serve(port: Option<u16>, out: Option<PathBuf>, file: &FileConfig) -> Result<(), CliError> {
    let port = port.or(file.port).unwrap_or(DEFAULT_PORT);
    let dir = output_dir(out, file.out.clone(), PathBuf::from(DEFAULT_OUT));
    create_dir(&dir)?;
    let defaults = SessionConfig::default();
    let config = ServerConfig {
        addr: SocketAddr::from(([0, 0, 0, 0], port)),
        session: SessionConfig {
            controller: file.controller.unwrap_or(defaults.controller),
            gains: file.controllers.unwrap_or(defaults.gains),
            t_max: file.t_max,
            align_radius: file.align_radius,
        },
        records: Some(OutputPaths::in_dir(&dir).records),
    };
    let runtime = tokio::runtime::Runtime::new()
        .map_err(|e| CliError::Runtime(format!("cannot start runtime: {e}")))?;
    runtime
        .block_on(async {
            let server = Server::bind(config).await?;
            eprintln!("serving teleop.v1 on ws://{}", server.local_addr());
            server.run().await
        })
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Bench { command: BenchCommand::Run(args) } => bench_run(&args, &file),
        Command::Report { records, out } => report(records, out, &file),
        Command::Serve { port, out } => serve(port, out, &file),
        Command::Replay { records, trial } => replay_cmd(records, trial, &file),
        Command::Compare { a, b, out } => compare_cmd(a, b, out, &file),
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                eprintln!("\n{}", usage());
            }
            e.code()
        }
    }
}

/// Usage summary printed with usage errors.
pub fn usage() -> String {
    use clap::CommandFactory;
    Cli::command().render_usage().to_string()
}
