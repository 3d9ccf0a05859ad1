//! Command-line front end: episode stabilization, hand-to-robot retargeting,
//! stabilization metrics, calibration and built-in self checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::PipelineConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "egokit", version, about = "Egocentric video stabilization and hand-to-robot retargeting")]
pub struct Cli {
    /// JSON pipeline configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output root; overrides the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Random seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stabilize episodes described by manifest files.
    Stabilize {
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
    },
    /// Convert a hand keypoint stream into a bimanual joint trajectory.
    Retarget {
        #[arg(long)]
        keypoints: PathBuf,
        #[arg(long)]
        chain: PathBuf,
        #[arg(long)]
        calibration: PathBuf,
        #[arg(long)]
        name: Option<String>,
    },
    /// Compare stabilization metrics of two episode trees.
    Metrics {
        #[arg(long)]
        before: PathBuf,
        #[arg(long)]
        after: PathBuf,
        #[arg(long)]
        name: Option<String>,
    },
    /// Fit the human-to-robot transform from point pairs.
    Calibrate {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        name: Option<String>,
    },
    /// Run built-in numerical self checks.
    Check {
        #[arg(long, hide = true)]
        corrupt_schedule: Option<f64>,
    },
}

fn emit_error(err: &mut (dyn Write + Send), e: &CliError, episode: Option<&str>) {
    let _ = writeln!(err, "{}", serde_json::to_string(&e.report(episode)).expect("report serializes"));
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    let cfg = cfg.with_overrides(cli.seed, cli.out.clone());
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cli: &Cli, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32 {
    let cfg = match load_config(cli) {
        Ok(c) => c,
        Err(e) => {
            emit_error(err, &e, None);
            return e.exit_code();
        }
    };
    let result: Result<(), CliError> = match &cli.command {
        Command::Stabilize { manifests } => {
            let mut code = 0;
            for (id, r) in commands::stabilize::run(manifests, &cfg) {
                match r {
                    Ok(p) => {
                        let _ = writeln!(out, "{}", p.display());
                    }
                    Err(e) => {
                        emit_error(err, &e, Some(&id));
                        if code == 0 {
                            code = e.exit_code();
                        }
                    }
                }
            }
            return code;
        }
        Command::Retarget { keypoints, chain, calibration, name } => {
            let inputs = commands::retarget::RetargetInputs { keypoints, chain, calibration, name: name.as_deref() };
            commands::retarget::run(&inputs, &cfg).map(|p| {
                let _ = writeln!(out, "{}", p.display());
            })
        }
        Command::Metrics { before, after, name } => {
            let inputs = commands::metrics::MetricsInputs { before, after, name: name.as_deref() };
            commands::metrics::run(&inputs, &cfg).map(|(p, report)| {
                let _ = write!(out, "{}", commands::metrics::render_table(&report));
                let _ = writeln!(out, "{}", p.display());
            })
        }
        Command::Calibrate { pairs, name } => commands::calibrate::run(pairs, name.as_deref(), &cfg).map(|p| {
            let _ = writeln!(out, "{}", p.display());
        }),
        Command::Check { corrupt_schedule } => {
            let results = commands::check::run(*corrupt_schedule);
            for r in &results {
                let _ = writeln!(out, "{}", r.line());
            }
            match results.iter().find(|r| !r.passed) {
                None => Ok(()),
                Some(f) => Err(CliError::CheckFailed(format!("{}: {}", f.name, f.detail))),
            }
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            emit_error(err, &e, None);
            e.exit_code()
        }
    }
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit status.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = write!(out, "{e}");
            return 0;
        }
        Err(e) => {
            let ce = CliError::InvalidInput(e.to_string().trim().to_string());
            emit_error(err, &ce, None);
            return ce.exit_code();
        }
    };
    match cli.jobs {
        Some(0) => {
            let e = CliError::InvalidInput("--jobs must be at least 1".into());
            emit_error(err, &e, None);
            e.exit_code()
        }
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli, out, err)),
            Err(e) => {
                let e = CliError::Io(e.to_string());
                emit_error(err, &e, None);
                e.exit_code()
            }
        },
        None => dispatch(&cli, out, err),
    }
}
