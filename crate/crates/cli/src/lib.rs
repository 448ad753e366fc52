//! Batch pipeline runner over a set of repair instances.
//!
//! Each stage reads the previous stage's artifact from the run directory and
//! writes its own: `localize` produces the file ranking and edit locations,
//! `search` the candidate patches, `refine` the refined patches and
//! `evaluate` the per-instance and aggregate report. `report` prints a table
//! over one or more run directories.

pub mod artifacts;
pub mod config;
pub mod instances;
pub mod pipeline;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::LoadedConfig;
use pipeline::{Pipeline, StageReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INSTANCE_FAILURES: i32 = 1;
pub const EXIT_FATAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "patchtree",
    version,
    about = "Localize, search, refine and evaluate repository patches"
)]
pub struct Cli {
    /// Pipeline config file.
    #[arg(long, global = true, default_value = "patchtree.toml")]
    pub config: PathBuf,
    /// Comma-separated instance ids to process (default: all).
    #[arg(long, global = true)]
    pub instances: Option<String>,
    /// Run directory (default: paths.out from the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides backend.seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank files and propose edit locations.
    Localize,
    /// Search for a patch per instance.
    Search,
    /// Refine the searched patches with execution feedback.
    Refine,
    /// Score the latest predictions.
    Evaluate,
    /// Run localize, search, refine and evaluate in order.
    Run,
    /// Summarize one or more evaluated run directories.
    Report {
        /// Run directories; the first is the reference for deltas.
        runs: Vec<PathBuf>,
    },
    /// Print the simulator digest of a diff file.
    Digest { diff: PathBuf },
}

fn stage_exit(report: StageReport) -> i32 {
    if report.ok() {
        return EXIT_OK;
    }
    for (id, reason) in &report.failures {
        eprintln!("{id}: {reason}");
    }
    EXIT_INSTANCE_FAILURES
}

fn execute(cli: Cli) -> anyhow::Result<i32> {
    let open = |cli: &Cli| -> anyhow::Result<Pipeline> {
        let cfg = LoadedConfig::load(&cli.config)?;
        Pipeline::open(cfg, cli.out.clone(), cli.seed, cli.instances.as_deref())
    };
    match &cli.command {
        Command::Localize => Ok(stage_exit(open(&cli)?.localize()?)),
        Command::Search => Ok(stage_exit(open(&cli)?.search()?)),
        Command::Refine => Ok(stage_exit(open(&cli)?.refine()?)),
        Command::Evaluate => Ok(stage_exit(open(&cli)?.evaluate()?)),
        Command::Run => Ok(stage_exit(open(&cli)?.run_all()?)),
        Command::Report { runs } => {
            let dirs = if runs.is_empty() {
                match &cli.out {
                    Some(o) => vec![o.clone()],
                    None => {
                        let cfg = LoadedConfig::load(&cli.config)?;
                        vec![cfg.resolve(&cfg.config.paths.out)]
                    }
                }
            } else {
                runs.clone()
            };
            print!("{}", report::report(&dirs)?);
            Ok(EXIT_OK)
        }
        Command::Digest { diff } => {
            println!("{}", pipeline::digest_file(diff)?);
            Ok(EXIT_OK)
        }
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code: 0 on success, 1 when some instances failed, 2 on
/// fatal errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_FATAL } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_FATAL
        }
    }
}
