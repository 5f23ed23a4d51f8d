//! `grasplab`: grasp sampling, labelling, selection and evaluation on point clouds.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use settings::{CliError, Settings, EXIT_USAGE};

#[derive(Parser, Debug)]
#[command(name = "grasplab", version, about = "Parallel-jaw grasp geometry toolkit")]
pub struct Cli {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. `--set labels.k1=512`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Randomly keep this many input points before processing.
    #[arg(long, global = true)]
    pub subsample: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct GripperArg {
    /// Gripper depth, width, height and finger thickness in meters.
    #[arg(long, value_name = "D,W,H,T")]
    pub gripper: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Estimate and attach surface normals.
    Normals {
        cloud: PathBuf,
        /// Neighbours per normal estimate.
        #[arg(short)]
        k: Option<usize>,
        /// Output path.
        #[arg(short, long = "output")]
        o: PathBuf,
    },
    /// Generate grasp candidates from Darboux frames.
    Sample {
        cloud: PathBuf,
        #[command(flatten)]
        gripper: GripperArg,
        #[arg(long)]
        centers: Option<usize>,
        #[arg(long)]
        orientations: Option<usize>,
        #[arg(long)]
        angles: Option<usize>,
        /// Half-range of approach-angle offsets, radians.
        #[arg(long)]
        angle_range: Option<f64>,
        #[arg(long)]
        neighbors: Option<usize>,
        /// Output path.
        #[arg(short, long = "output")]
        o: PathBuf,
    },
    /// Keep the grasps that do not collide with the cloud.
    Collide {
        cloud: PathBuf,
        grasps: PathBuf,
        #[command(flatten)]
        gripper: GripperArg,
        /// Output path.
        #[arg(short, long = "output")]
        o: PathBuf,
    },
    /// Recompute antipodal scores from contacts.
    Score {
        cloud: PathBuf,
        grasps: PathBuf,
        #[command(flatten)]
        gripper: GripperArg,
        /// Output path.
        #[arg(short, long = "output")]
        o: PathBuf,
    },
    /// Per-point grasp confidence.
    Confidence {
        cloud: PathBuf,
        grasps: PathBuf,
        /// Distance threshold, meters.
        #[arg(long)]
        dth: Option<f64>,
        /// Gripper width recorded with the field; defaults to the configured gripper.
        #[arg(long)]
        width: Option<f64>,
        /// Output path.
        #[arg(short, long = "output")]
        o: PathBuf,
    },
    /// Anchor and refine training labels for the most confident points.
    Labels {
        grasps: PathBuf,
        #[arg(long)]
        cloud: PathBuf,
        /// Precomputed confidence field; computed from the grasps when absent.
        #[arg(long)]
        confidence: Option<PathBuf>,
        #[arg(long)]
        k1: Option<usize>,
        /// One proposal per positive point, in positive-point order.
        #[arg(long)]
        proposals: Option<PathBuf>,
        /// Gripper width when computing confidence.
        #[arg(long)]
        width: Option<f64>,
        /// Output directory.
        #[arg(short, long = "output")]
        o: PathBuf,
    },
    /// Grasp-region and closing-area point indices for the most confident points.
    Regions {
        cloud: PathBuf,
        #[arg(long)]
        confidence: PathBuf,
        #[arg(long)]
        k1: Option<usize>,
        /// Ball radius, meters.
        #[arg(long)]
        radius: Option<f64>,
        /// Points kept per region.
        #[arg(long)]
        keep: Option<usize>,
        /// Proposals whose closing areas to extract, one per positive point.
        #[arg(long)]
        proposals: Option<PathBuf>,
        #[command(flatten)]
        gripper: GripperArg,
        /// Output directory.
        #[arg(short, long = "output")]
        o: PathBuf,
    },
    /// Finite-difference gradient checks for every loss.
    Losscheck {
        /// Central-difference step.
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        configs: Option<usize>,
    },
    /// Print the grasp a selection policy picks.
    Select {
        grasps: PathBuf,
        #[arg(long, value_enum)]
        policy: PolicyKind,
        /// Coefficient file for the analytic policy.
        #[arg(long)]
        coeffs: Option<PathBuf>,
    },
    /// Fit policy coefficients to `x,y` samples.
    Fit {
        #[arg(long, value_enum)]
        mode: FitMode,
        xy: PathBuf,
        /// Output path.
        #[arg(short, long = "output")]
        o: PathBuf,
    },
    /// Collision-free ratio, antipodal scores and coverage of predicted grasps.
    Eval {
        grasps: PathBuf,
        scene: PathBuf,
        ground_truth: PathBuf,
        #[command(flatten)]
        gripper: GripperArg,
        #[arg(long)]
        pool: Option<usize>,
        #[arg(long)]
        top: Option<usize>,
        /// Partial view used for selection; the scene still scores.
        #[arg(long)]
        observed: Option<PathBuf>,
        /// Also write the report as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolicyKind {
    Heuristic,
    Analytic,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitMode {
    Sigmoid,
    Linear,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(text) = std::env::var("GRASPLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::usage(format!("GRASPLAB_THREADS must be a positive integer, got '{text}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::usage(format!("cannot configure {n} threads: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let settings = Settings::load(cli.config.as_deref(), &cli.overrides)?;
    commands::dispatch(&cli, &settings)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE as u8),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
