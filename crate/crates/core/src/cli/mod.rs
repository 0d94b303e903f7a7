//! The `hcl` command line: bound tables, certification runs, trajectory
//! synthesis and the sharpness experiment.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{BoundsArgs, SharpnessArgs, TrajectoryArgs, VerifyArgs};

use crate::error::Error;
use crate::par::Exec;

pub use config::{ConfigFile, Resolver, OUT_DIR_ENV};

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "hcl", version, about = "Hilbert distance versus centro-affine length")]
pub struct Cli {
    /// Flat key = value file supplying defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides HCL_OUT_DIR and the config file).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Run on a single thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct BoundArgs {
    /// Cubic-form bound.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Blaschke dimension; sets gamma = (n-1)/sqrt(n).
    #[arg(long)]
    pub n: Option<u32>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate every length bound against the Hilbert distance.
    Bounds(BoundsArgs),
    /// Certify the value functions on a grid.
    Verify(VerifyArgs),
    /// Synthesize an optimal trajectory and write it as CSV.
    Trajectory(TrajectoryArgs),
    /// Smooth the extremal paths and measure how close they get to the bounds.
    Sharpness(SharpnessArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProblemArg {
    FreeMax,
    BoundedMax,
    BoundedMin,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    MaxFixed,
    MaxFree,
    MinFixed,
    MinFree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SharpArg {
    Max,
    Min,
    Free,
    All,
}

/// What a command reports back besides its text output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

/// Parse `args`, run the command writing its report to `out`, and return the exit code.
pub fn run_with<I, T, W, E>(args: I, out: &mut W, err: &mut E) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
    W: Write,
    E: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(Outcome::Pass) => EXIT_OK,
        Ok(Outcome::Fail) => EXIT_FAILED,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

/// Entry point used by the binary.
pub fn run() -> i32 {
    run_with(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

fn execute<W: Write>(cli: Cli, out: &mut W) -> Result<Outcome, Error> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let resolver = Resolver::new(file);
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    let out_dir = resolver.out_dir(cli.out_dir.clone())?;
    let ctx = commands::Context { resolver, exec, out_dir };
    match cli.command {
        Command::Bounds(a) => commands::bounds(&ctx, &a, out),
        Command::Verify(a) => commands::verify(&ctx, &a, out),
        Command::Trajectory(a) => commands::trajectory(&ctx, &a, out),
        Command::Sharpness(a) => commands::sharpness(&ctx, &a, out),
    }
}
