//! Command-line front end.
//!
//! Exit codes: 0 success, 1 some points failed, 2 invalid configuration,
//! 3 solver failure (no point succeeded, or results could not be written).

pub mod config;
pub mod output;
pub mod sweep;

use std::collections::BTreeSet;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};

use config::{parse_config, ConfigError, Output, SweepConfig, Truncation};
use output::{write_outputs, RunInfo};
use sweep::{run_sweep, RunOptions, SweepError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "jcq", version, about = "Driven dissipative Jaynes-Cummings steady states")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads over sweep points.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Fock truncation: a level count or `auto`.
    #[arg(long)]
    pub truncation: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Steady state at the base parameters (axes ignored).
    Steady(Common),
    /// Full parameter sweep with the configured outputs.
    Sweep(Common),
    /// Husimi Q fields of the cavity.
    Qfunc(Common),
    /// Numerical Wigner fields, plus the analytic one in the dispersive regime.
    Wigner(Common),
    /// Mean-field branches.
    Semiclassical(Common),
    /// Qubit-cavity entanglement entropy.
    Entropy(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Steady(_) => "steady",
            Self::Sweep(_) => "sweep",
            Self::Qfunc(_) => "qfunc",
            Self::Wigner(_) => "wigner",
            Self::Semiclassical(_) => "semiclassical",
            Self::Entropy(_) => "entropy",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Self::Steady(c)
            | Self::Sweep(c)
            | Self::Qfunc(c)
            | Self::Wigner(c)
            | Self::Semiclassical(c)
            | Self::Entropy(c) => c,
        }
    }
}

/// Applies the subcommand's output selection to a parsed configuration.
pub fn specialize(cmd: &Command, mut cfg: SweepConfig) -> Result<SweepConfig, ConfigError> {
    let set = |xs: &[Output]| xs.iter().copied().collect::<BTreeSet<_>>();
    match cmd {
        Command::Sweep(_) => {}
        Command::Steady(_) => cfg.axes.clear(),
        Command::Qfunc(_) => cfg.outputs = set(&[Output::MeanN, Output::Qfield]),
        Command::Wigner(_) => {
            cfg.outputs = set(&[Output::MeanN, Output::WfieldNumeric, Output::WfieldAnalytic]);
            if cfg.check_regime().is_err() {
                cfg.outputs.remove(&Output::WfieldAnalytic);
            }
        }
        Command::Semiclassical(_) => cfg.outputs = set(&[Output::Branches]),
        Command::Entropy(_) => {
            cfg.outputs = set(&[Output::MeanN, Output::SigmaZ, Output::Entropy])
        }
    }
    cfg.check_regime()?;
    Ok(cfg)
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let cmd = &cli.command;
    let common = cmd.common();
    let text = match std::fs::read_to_string(&common.config) {
        Ok(t) => t,
        Err(e) => {
            error!("cannot read {}: {e}", common.config.display());
            return EXIT_CONFIG;
        }
    };
    let cfg = parse_config(&text).and_then(|mut cfg| {
        if let Some(t) = &common.truncation {
            cfg.truncation = t.parse::<Truncation>()?;
        }
        specialize(cmd, cfg)
    });
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            error!("{}: {e}", common.config.display());
            return EXIT_CONFIG;
        }
    };
    if common.threads == Some(0) {
        error!("--threads must be positive");
        return EXIT_CONFIG;
    }

    info!("{} points", cfg.point_count());
    let (rows, all_failed) = match run_sweep(&cfg, RunOptions { threads: common.threads }) {
        Ok(rows) => (rows, false),
        Err(SweepError::AllFailed { rows }) => (rows, true),
        Err(e) => {
            error!("{e}");
            return EXIT_SOLVER;
        }
    };
    let run_info = RunInfo {
        command: cmd.name().to_string(),
        threads: common.threads,
    };
    let manifest = match write_outputs(&rows, &cfg, &common.out, &run_info) {
        Ok(m) => m,
        Err(e) => {
            error!("{e}");
            return EXIT_SOLVER;
        }
    };
    for r in rows.iter().filter(|r| r.failed()) {
        warn!("point {}: {}", r.index, r.error.as_deref().unwrap_or_default());
    }
    if all_failed {
        EXIT_SOLVER
    } else if manifest.failed_points > 0 {
        EXIT_PARTIAL
    } else {
        EXIT_OK
    }
}

/// Process entry: parses `std::env::args`, installs the logger and runs.
pub fn main_entry() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    run(cli)
}
