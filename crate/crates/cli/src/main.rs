use std::path::PathBuf;
use std::process::ExitCode;

use bootbandit_cli::{
    cmd_sample_surfaces, cmd_simulate, cmd_tune, cmd_validate_design, Overrides,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bootbandit", version, about = "Bootstrap linear bandit simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output directory (default: `out_dir` from the config, else `results`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; falls back to BOOTBANDIT_THREADS, then the config.
    #[arg(long, env = "BOOTBANDIT_THREADS")]
    threads: Option<usize>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            seed: self.seed,
            threads: self.threads,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write curves.csv, summary.csv and effective_config.toml.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Pick hyperparameters on tuning surfaces and write tuned.toml.
    Tune {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Generate an initial design, report on it and write design.csv.
    ValidateDesign {
        #[arg(long, default_value_t = 7)]
        k: usize,
        #[arg(long, default_value_t = 32)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Draw surfaces from the meta-model and print calibration statistics.
    SampleSurfaces {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = std::io::stdout().lock();
    let result = match &cli.command {
        Command::Simulate { config, common } => {
            cmd_simulate(config, &common.overrides(), &mut out).map(drop)
        }
        Command::Tune { config, grid, common } => {
            cmd_tune(config, grid, &common.overrides(), &mut out).map(drop)
        }
        Command::ValidateDesign { k, runs, seed, out: dir } => {
            cmd_validate_design(*k, *runs, *seed, dir, &mut out).map(drop)
        }
        Command::SampleSurfaces { config, count, common } => {
            cmd_sample_surfaces(config.as_deref(), *count, &common.overrides(), &mut out).map(drop)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
