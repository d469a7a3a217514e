//! Config-driven experiment runner behind the `quatfield` binary.
//!
//! `quatfield run <subcommand> --config exp.toml [--out DIR] [--jobs N] [--seed S]`
//! writes CSV/JSON tables, field files and a `manifest.json` into the output
//! directory. Exit codes: 0 success, 2 config error, 3 numerical failure (with
//! `diagnostics.json`), 1 I/O failure while writing results.

pub mod config;
mod output;
mod runs;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Error;
pub use config::{parse_config, ExperimentConfig};
pub use output::{Cell, Outputs};

/// Environment variable overriding the output directory.
pub const OUT_ENV: &str = "QUATFIELD_OUT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "quatfield", version, about = "Harmonic quaternion field experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment.
    Run(RunArgs),
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    #[arg(value_enum)]
    pub experiment: Experiment,
    /// TOML experiment file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (default: `output_dir` from the config, else `out`).
    #[arg(long, env = OUT_ENV)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Solve,
    Green,
    Control,
    Separate,
    Jets,
    Density,
    Recover,
    Analyze,
    Convergence,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Solve => "solve",
            Experiment::Green => "green",
            Experiment::Control => "control",
            Experiment::Separate => "separate",
            Experiment::Jets => "jets",
            Experiment::Density => "density",
            Experiment::Recover => "recover",
            Experiment::Analyze => "analyze",
            Experiment::Convergence => "convergence",
        }
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    experiment: &'a str,
    config_sha256: String,
    seed: u64,
    versions: Versions,
    jobs: usize,
    wall_time_s: f64,
    outputs: Vec<output::OutputEntry>,
}

#[derive(Debug, Serialize)]
struct Versions {
    quatfield: &'static str,
    output_format: u32,
}

#[derive(Debug, Serialize)]
struct Diagnostics<'a> {
    experiment: &'a str,
    error: String,
    kind: &'static str,
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::NotConverged { .. } => "not_converged",
        Error::IllConditioned(_) | Error::NonSpdReadout => "ill_conditioned",
        Error::Insufficient(_) => "insufficient",
        Error::NontrivialTopology(_) => "topology",
        Error::ControlFailed(_) => "control",
        _ => "numerical",
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses arguments, runs the experiment and returns the process exit code.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Run(args) => execute(&args),
    }
}

/// Runs one experiment as described by `args`; see the module docs for exit codes.
pub fn execute(args: &RunArgs) -> i32 {
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return EXIT_CONFIG;
        }
    };
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    if let Err(e) = std::fs::create_dir_all(&out) {
        eprintln!("error: cannot create {}: {e}", out.display());
        return EXIT_IO;
    }
    let seed = args.seed.unwrap_or(cfg.seed);
    let jobs = args.jobs.unwrap_or_else(rayon::current_num_threads).max(1);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return EXIT_CONFIG;
        }
    };
    let start = Instant::now();
    let mut outputs = Outputs::new(&out);
    let result = pool.install(|| runs::dispatch(args.experiment, &cfg, seed, &mut outputs));
    let name = args.experiment.name();
    match result {
        Ok(()) => {
            let manifest = Manifest {
                experiment: name,
                config_sha256: sha256_hex(text.as_bytes()),
                seed,
                versions: Versions {
                    quatfield: env!("CARGO_PKG_VERSION"),
                    output_format: 1,
                },
                jobs,
                wall_time_s: start.elapsed().as_secs_f64(),
                outputs: match outputs.entries() {
                    Ok(v) => v,
                    Err(e) => {
                        eprintln!("error: {e}");
                        return EXIT_IO;
                    }
                },
            };
            if let Err(e) = write_json(&out.join("manifest.json"), &manifest) {
                eprintln!("error: {e}");
                return EXIT_IO;
            }
            EXIT_OK
        }
        Err(Error::Config(msg)) => {
            eprintln!("error: config error: {msg}");
            EXIT_CONFIG
        }
        Err(Error::Io(e)) => {
            eprintln!("error: {e}");
            EXIT_IO
        }
        Err(e) => {
            eprintln!("error: {e}");
            let d = Diagnostics {
                experiment: name,
                error: e.to_string(),
                kind: error_kind(&e),
            };
            if let Err(w) = write_json(&out.join("diagnostics.json"), &d) {
                eprintln!("error: {w}");
            }
            EXIT_NUMERICAL
        }
    }
}

fn write_json(path: &Path, v: &impl Serialize) -> crate::Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}
