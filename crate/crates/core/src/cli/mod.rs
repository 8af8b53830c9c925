//! Command-line front end.
//!
//! Every subcommand reads an experiment file (`--spec`) and writes CSV tables
//! into `--out`. Exit status is 0 on success, 1 when a verdict fails and 2 for
//! malformed input.

mod commands;
pub mod spec;
mod verify;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use spec::SpecFile;
pub use verify::{invariant_suite, verify_mdp_file, CheckResult};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "prsa", version, about = "Averaged stochastic approximation: simulation, bounds and verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: GlobalOpts,
}

#[derive(Debug, Clone, clap::Args)]
pub struct GlobalOpts {
    /// Experiment file.
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
    /// Output directory for CSV tables.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Overrides `[run] reps`.
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    /// Overrides `[run] seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub parallel: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Run an ensemble and write per-replicate errors.
    Simulate,
    /// Tabulate the high-probability bounds over a (k, δ) grid.
    Bound,
    /// Check empirical exceedance of a bound.
    Coverage,
    /// Compare the pair-Gaussian quantile with its exact value and the bound.
    Tightness,
    /// Tail-class diagnostics and the truncated MGF study.
    Tail,
    /// TD(n) ensemble and bound coverage.
    RlTd,
    /// Q-learning ensemble and bound coverage.
    RlQ,
    /// Off-policy TD with linear features.
    RlOffpolicy,
    /// Run the invariant suite and print a manifest.
    Verify,
}

/// Outcome of a successful run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok { Verdict::Pass } else { Verdict::Fail }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
        }
    }
}

pub fn execute(command: Command, opts: &GlobalOpts) -> Result<Verdict> {
    if command == Command::Verify {
        return verify::cmd_verify(opts);
    }
    let path = opts.spec.as_ref().ok_or_else(|| Error::Spec { line: 0, msg: "--spec is required".into() })?;
    let spec = SpecFile::load(path)?;
    std::fs::create_dir_all(&opts.out)?;
    let ctx = commands::Context { spec: &spec, opts };
    match command {
        Command::Simulate => commands::cmd_simulate(&ctx),
        Command::Bound => commands::cmd_bound(&ctx),
        Command::Coverage => commands::cmd_coverage(&ctx),
        Command::Tightness => commands::cmd_tightness(&ctx),
        Command::Tail => commands::cmd_tail(&ctx),
        Command::RlTd => commands::cmd_rl_td(&ctx),
        Command::RlQ => commands::cmd_rl_q(&ctx),
        Command::RlOffpolicy => commands::cmd_rl_offpolicy(&ctx),
        Command::Verify => unreachable!(),
    }
}

/// Parses arguments, runs the command and returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command, &cli.opts) {
        Ok(v) => v.exit_code(),
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
