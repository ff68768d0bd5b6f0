//! `socnav`: dataset generation, FCN training and prediction, planning, IRL
//! training and evaluation from the command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "socnav",
    version,
    about = "Social navigation path planning from demonstrations"
)]
struct Cli {
    /// Base random seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Raster size in pixels (multiple of 8) covering the 10 m window.
    #[arg(long, global = true, default_value_t = 64)]
    grid_size: usize,
    /// Directory that receives every output file.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic scenarios and expert demonstrations.
    GenData(GenDataArgs),
    /// Train the path-prediction network on a generated dataset.
    TrainFcn(TrainFcnArgs),
    /// Predict the path raster for one scenario.
    Predict(PredictArgs),
    /// Plan a path with RRT*.
    Plan(PlanArgs),
    /// Learn feature weights from demonstrations.
    TrainIrl(TrainIrlArgs),
    /// Compare planned paths with expert paths.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct GenDataArgs {
    /// Training scenarios.
    #[arg(long, default_value_t = 400)]
    train: usize,
    /// Validation scenarios.
    #[arg(long, default_value_t = 50)]
    validation: usize,
    /// Test scenarios.
    #[arg(long, default_value_t = 50)]
    test: usize,
    /// Largest number of people per scenario.
    #[arg(long, default_value_t = 5)]
    max_people: usize,
    /// Largest number of rectangular obstacles per scenario.
    #[arg(long, default_value_t = 3)]
    max_obstacles: usize,
    /// Share of people placed near the straight robot-goal line.
    #[arg(long, default_value_t = 0.0)]
    people_near_route: f64,
    /// Expert weights CSV (`name,value`); defaults to 0.3/0.25/0.15/0.15/0.15.
    #[arg(long)]
    expert_weights: Option<PathBuf>,
    /// RRT* iterations of the expert planner.
    #[arg(long, default_value_t = 5000)]
    planner_iterations: usize,
    /// Seed of the train/validation/test assignment (defaults to --seed).
    #[arg(long)]
    split_seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Args)]
struct TrainFcnArgs {
    /// Dataset directory written by gen-data.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// Learning rate.
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// Mini-batch size.
    #[arg(long, default_value_t = 8)]
    batch: usize,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    optimizer: OptimizerArg,
    /// Loss weight of path pixels (1 = plain MSE).
    #[arg(long, default_value_t = 1.0)]
    positive_weight: f64,
    /// Train on random flips and quarter turns about the robot pixel.
    #[arg(long)]
    augment: bool,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Model file written by train-fcn.
    #[arg(long)]
    model: PathBuf,
    /// Scenario JSON.
    #[arg(long)]
    scenario: PathBuf,
}

#[derive(Debug, Args)]
struct PlanArgs {
    /// Scenario JSON.
    #[arg(long)]
    scenario: PathBuf,
    /// `uniform`, `weights:FILE` (feature weights CSV) or `prediction:FILE`
    /// (FGRID raster, also used to bias sampling).
    #[arg(long, default_value = "uniform")]
    cost: String,
    /// Share of samples drawn from the prediction.
    #[arg(long, default_value_t = 0.7)]
    bias: f64,
    #[arg(long, default_value_t = 5000)]
    iterations: usize,
    /// Leave the tree out of the overlay image.
    #[arg(long)]
    no_tree: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Algo {
    Rtirl,
    Rlt,
}

#[derive(Debug, Args)]
struct TrainIrlArgs {
    #[arg(long, value_enum)]
    algo: Algo,
    /// Directory of `<name>.scenario.json` + `<name>.path.csv` pairs.
    #[arg(long)]
    demos: PathBuf,
    #[arg(long, default_value_t = 30)]
    iterations: usize,
    /// Learning rate.
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    /// Planner runs averaged per demonstration (rtirl).
    #[arg(long, default_value_t = 5)]
    runs: usize,
    /// Loss subtracted outside the expert corridor (rlt).
    #[arg(long, default_value_t = 0.5)]
    margin: f64,
    /// RRT* iterations per planner run.
    #[arg(long, default_value_t = 5000)]
    planner_iterations: usize,
    /// Multiplicative weight updates instead of projected steps.
    #[arg(long)]
    exponentiated: bool,
    /// Shrink the learning rate as 1/sqrt(1 + iteration).
    #[arg(long)]
    step_decay: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Directory of planned `<name>.path.csv` files.
    #[arg(long)]
    plans: PathBuf,
    /// Directory of expert `<name>.path.csv` files.
    #[arg(long)]
    experts: PathBuf,
    /// Directory of `<name>.scenario.json` files.
    #[arg(long)]
    scenarios: PathBuf,
    /// Prefix of the report file names.
    #[arg(long, default_value = "")]
    name: String,
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("SOCNAV_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .map_err(|_| format!("SOCNAV_THREADS must be a non-negative integer, got {value:?}"))?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
