//! Command-line driver for `unravel-core`.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use unravel_core::{Method, Result};

use crate::config::RunConfig;

/// Lindblad master equations and their quantum-trajectory unravellings.
#[derive(Parser)]
#[command(name = "unravel", version)]
struct Cli {
    /// Default output directory.
    #[arg(long, global = true, env = "UNRAVEL_OUT_DIR", default_value = ".")]
    out_root: PathBuf,
    /// Worker threads for ensembles (0 = all cores). Never affects output.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// mcwf, exact or linear.
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    trajectories: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated checkpoint times.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Option<Vec<f64>>,
    /// Keep every n-th state in trajectory outputs.
    #[arg(long)]
    stride: Option<usize>,
    /// Start in this basis state instead of the model file's initial_state.
    #[arg(long)]
    basis: Option<usize>,
    /// Output directory for this run.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self, out_root: &std::path::Path) -> Result<config::Resolved> {
        let cli = RunConfig {
            model: self.model.clone(),
            method: self.method,
            dt: self.dt,
            horizon: self.horizon,
            trajectories: self.trajectories,
            seed: self.seed,
            checkpoints: self.checkpoints.clone(),
            stride: self.stride,
            basis: self.basis,
            out_dir: self.out_dir.clone(),
        };
        let merged = match &self.config {
            Some(p) => cli.over(RunConfig::load(p)?),
            None => cli,
        };
        merged.resolve(out_root)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file.
    Validate { model: PathBuf },
    /// Integrate the master equation.
    Master(RunArgs),
    /// Simulate one trajectory.
    Trajectory {
        #[command(flatten)]
        run: RunArgs,
        /// Trajectory index (selects the random substream).
        #[arg(long, default_value_t = 0)]
        index: u64,
        /// Also write the jump path for replay.
        #[arg(long)]
        dump_paths: bool,
    },
    /// Ensemble-average density matrices at checkpoints.
    Ensemble {
        #[command(flatten)]
        run: RunArgs,
        /// Also write every trajectory as one JSON line.
        #[arg(long)]
        save_trajectories: bool,
    },
    /// Compare an ensemble against the master equation.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Integrate the master equation of this model instead.
        #[arg(long)]
        master_model: Option<PathBuf>,
    },
    /// Spontaneous localization on a lattice.
    GrwDemo {
        #[arg(long, default_value_t = 64)]
        sites: usize,
        /// Number of Gaussian centres.
        #[arg(long, default_value_t = 64)]
        grid: usize,
        /// Gaussian width parameter; tuned for completeness when absent.
        #[arg(long)]
        width_a: Option<f64>,
        #[arg(long, default_value_t = -32.0, allow_hyphen_values = true)]
        box_min: f64,
        #[arg(long, default_value_t = 32.0, allow_hyphen_values = true)]
        box_max: f64,
        #[arg(long, default_value_t = 10_000)]
        trajectories: u64,
        #[arg(long, default_value_t = 30.0)]
        horizon: f64,
        #[arg(long, default_value_t = 0.05)]
        dt: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Nearest-neighbour hopping amplitude.
        #[arg(long, default_value_t = 0.0)]
        hopping: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        packet_center: f64,
        #[arg(long, default_value_t = 8.0)]
        packet_sigma: f64,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Dump or replay unit-rate Poisson paths.
    #[command(subcommand)]
    Paths(PathsCommand),
}

#[derive(Subcommand)]
enum PathsCommand {
    /// Sample a unit-rate path with one channel per jump operator.
    Dump {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// Drive a trajectory with a stored path.
    Replay {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        path: PathBuf,
        /// `linear` keeps the unnormalized state; `replay` normalizes.
        #[arg(long, default_value = "replay")]
        as_method: Method,
    },
}

fn run(cli: Cli) -> Result<bool> {
    let root = cli.out_root.as_path();
    match cli.command {
        Command::Validate { model } => commands::validate(&model),
        Command::Master(run) => commands::master(&run.resolve(root)?),
        Command::Trajectory { run, index, dump_paths } => commands::trajectory(&run.resolve(root)?, index, dump_paths),
        Command::Ensemble { run, save_trajectories } => {
            commands::ensemble(&run.resolve(root)?, cli.workers, save_trajectories)
        }
        Command::Compare { run, master_model } => {
            commands::compare(&run.resolve(root)?, cli.workers, master_model.as_deref())
        }
        Command::GrwDemo {
            sites,
            grid,
            width_a,
            box_min,
            box_max,
            trajectories,
            horizon,
            dt,
            seed,
            hopping,
            packet_center,
            packet_sigma,
            out_dir,
        } => commands::grw_demo(
            &commands::GrwArgs {
                sites,
                grid,
                width_a,
                box_bounds: (box_min, box_max),
                trajectories,
                horizon,
                dt,
                seed,
                hopping,
                packet_center,
                packet_sigma,
                out_dir: out_dir.unwrap_or_else(|| root.to_path_buf()),
            },
            cli.workers,
        ),
        Command::Paths(PathsCommand::Dump { run, index }) => commands::paths_dump(&run.resolve(root)?, index),
        Command::Paths(PathsCommand::Replay { run, path, as_method }) => {
            commands::paths_replay(&run.resolve(root)?, &path, as_method)
        }
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code: 0 ok, 1 validation or statistical failure, 2 I/O or
/// usage, 3 numerical abort.
pub fn run_args<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
