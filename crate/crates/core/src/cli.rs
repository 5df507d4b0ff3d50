//! Argument parsing and exit codes for the `zanova` binary.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{Command, ExperimentConfig, Overrides};
use crate::error::Error;
use crate::experiments::{run as run_command, RunOutput};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "zanova", version, about = "Zero-mean ANOVA kernels and closed-form Sobol indices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Write k, k0 and k1 slices of univariate kernels.
    Decompose(CommonArgs),
    /// Fit one model and report its submodels and sensitivity indices.
    FitReport(CommonArgs),
    /// Replicated sensitivity study on the g-function.
    ReplicateG(CommonArgs),
    /// Replicated sensitivity study with noisy observations.
    ReplicateNoise(CommonArgs),
    /// Check the closed forms against brute-force grid projections.
    Verify(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Experiment config (JSON); the built-in default for the command otherwise.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Quadrature nodes for every measure.
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Worker threads for replicates (all cores by default).
    #[arg(long)]
    pub threads: Option<usize>,
}

impl Sub {
    pub fn split(&self) -> (Command, &CommonArgs) {
        match self {
            Sub::Decompose(a) => (Command::Decompose, a),
            Sub::FitReport(a) => (Command::FitReport, a),
            Sub::ReplicateG(a) => (Command::ReplicateG, a),
            Sub::ReplicateNoise(a) => (Command::ReplicateNoise, a),
            Sub::Verify(a) => (Command::Verify, a),
        }
    }
}

/// Loads the config for `command`, applying the command-line overrides.
pub fn load_config(command: Command, args: &CommonArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
                other => other,
            })?
        }
        None => ExperimentConfig::default_for(command),
    };
    cfg.apply(Overrides {
        seed: args.seed,
        replicates: args.replicates,
        nodes: args.nodes,
    });
    cfg.validate(command)?;
    Ok(cfg)
}

pub fn write_outputs(dir: &Path, out: &RunOutput) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for a in &out.artifacts {
        std::fs::write(dir.join(&a.name), &a.contents)?;
    }
    Ok(())
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: &Cli) -> i32 {
    let (command, args) = cli.command.split();
    let cfg = match load_config(command, args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let log = |msg: &str| eprintln!("{msg}");
    let result = match args.threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| run_command(command, &cfg, &log)),
            Err(e) => {
                eprintln!("error: --threads: {e}");
                return EXIT_CONFIG;
            }
        },
        None => run_command(command, &cfg, &log),
    };
    let out = match result {
        Ok(o) => o,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_NUMERICAL;
        }
    };
    if let Err(e) = write_outputs(&args.out, &out) {
        eprintln!("error: writing {}: {e}", args.out.display());
        return EXIT_NUMERICAL;
    }
    for line in &out.summary {
        println!("{line}");
    }
    if out.verified {
        EXIT_OK
    } else {
        EXIT_VERIFICATION
    }
}
