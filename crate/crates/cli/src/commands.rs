use std::fmt;
use std::path::{Path as FsPath, PathBuf};

use socnav::dataset::{build_dataset, GeneratorConfig, Manifest, Split};
use socnav::fcn::{build_reference_network, predict, train, NetworkModel, Optimizer, TrainConfig};
use socnav::irl::{rlt_train, rtirl_train, Demonstration, IrlConfig, UpdateRule};
use socnav::metrics::{EvalItem, EvalReport};
use socnav::planner::Planner;
use socnav::raster::{render_overlay, OverlayLayers, RasterStyle};
use socnav::{
    CostProvider, Execution, FeatureParams, FloatGrid, GridSpec, Path, PlanStats, PlannerParams,
    Scenario, WeightVector,
};

use crate::{
    Algo, Cli, Command, EvalArgs, GenDataArgs, OptimizerArg, PlanArgs, PredictArgs, TrainFcnArgs,
    TrainIrlArgs,
};

#[derive(Debug)]
pub enum CliError {
    /// Bad flag values: exit code 2.
    Usage(String),
    /// The work itself failed: exit code 1.
    Domain(socnav::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Domain(e) => write!(f, "{e}"),
        }
    }
}

impl From<socnav::Error> for CliError {
    fn from(e: socnav::Error) -> Self {
        CliError::Domain(e)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn io_err(path: &FsPath, e: std::io::Error) -> CliError {
    CliError::Domain(socnav::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn ensure_dir(dir: &FsPath) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write(path: PathBuf, body: impl AsRef<[u8]>) -> CliResult {
    std::fs::write(&path, body).map_err(|e| io_err(&path, e))
}

/// `dir/name.scenario.json` → `name`.
fn item_stem(path: &FsPath) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.split('.').next().unwrap_or_default().to_owned()
}

pub fn run(cli: &Cli) -> CliResult {
    if cli.grid_size == 0 || cli.grid_size % 8 != 0 {
        return Err(usage(format!(
            "--grid-size {} is not a positive multiple of 8",
            cli.grid_size
        )));
    }
    match &cli.command {
        Command::GenData(a) => gen_data(cli, a),
        Command::TrainFcn(a) => train_fcn(cli, a),
        Command::Predict(a) => predict_cmd(cli, a),
        Command::Plan(a) => plan_cmd(cli, a),
        Command::TrainIrl(a) => train_irl(cli, a),
        Command::Eval(a) => eval(cli, a),
    }
}

fn gen_data(cli: &Cli, a: &GenDataArgs) -> CliResult {
    let expert_weights = match &a.expert_weights {
        Some(p) => WeightVector::load(p)?,
        None => GeneratorConfig::default().expert_weights,
    };
    let config = GeneratorConfig {
        people_range: (0, a.max_people),
        obstacle_density: a.max_obstacles,
        people_near_route: a.people_near_route,
        expert_weights,
        expert_planner: PlannerParams {
            max_iterations: a.planner_iterations,
            ..PlannerParams::default()
        },
        grid_size: cli.grid_size,
        split: (a.train, a.validation, a.test),
        seed: cli.seed,
        split_seed: a.split_seed,
        ..GeneratorConfig::default()
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    let manifest = build_dataset(&config, &cli.out_dir, Execution::Parallel)?;
    println!(
        "wrote {} items to {}",
        manifest.entries.len(),
        cli.out_dir.display()
    );
    Ok(())
}

fn train_fcn(cli: &Cli, a: &TrainFcnArgs) -> CliResult {
    if a.epochs == 0 || a.batch == 0 || !(a.lr >= 0.0) || !(a.positive_weight > 0.0) {
        return Err(usage(
            "--epochs and --batch must be positive, --lr non-negative, --positive-weight positive",
        ));
    }
    let manifest = Manifest::load(&a.data)?;
    let train_set = manifest.load_samples(Split::Train)?;
    let validation = manifest.load_samples(Split::Validation)?;
    let first = train_set.first().ok_or_else(|| {
        CliError::Domain(socnav::Error::InvalidArgument(
            "dataset has no training items".into(),
        ))
    })?;
    if (first.input.height, first.input.width) != (cli.grid_size, cli.grid_size) {
        return Err(CliError::Domain(socnav::Error::InvalidArgument(format!(
            "dataset rasters are {}x{} but --grid-size is {}",
            first.input.height, first.input.width, cli.grid_size
        ))));
    }
    let mut model = build_reference_network(cli.grid_size)?.initialized(cli.seed);
    let config = TrainConfig {
        epochs: a.epochs,
        learning_rate: a.lr,
        batch_size: a.batch,
        seed: cli.seed,
        optimizer: match a.optimizer {
            OptimizerArg::Adam => Optimizer::Adam,
            OptimizerArg::Sgd => Optimizer::Sgd,
        },
        positive_weight: a.positive_weight,
        augment: a.augment,
        execution: Execution::Parallel,
    };
    let report = train(&mut model, &train_set, &validation, &config)?;
    ensure_dir(&cli.out_dir)?;
    model.save(cli.out_dir.join("model.fcn"))?;
    report.save_csv(cli.out_dir.join("training.csv"))?;
    println!(
        "{} parameters, final train MSE {:.6}",
        model.param_count(),
        report.final_train_mse().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn load_scenario(path: &FsPath) -> CliResult<Scenario> {
    let s = Scenario::load(path)?;
    s.validate()?;
    Ok(s)
}

fn predict_cmd(cli: &Cli, a: &PredictArgs) -> CliResult {
    let model = NetworkModel::load(&a.model)?;
    let scenario = load_scenario(&a.scenario)?;
    let (_, h, w) = model.input_shape();
    if h != w {
        return Err(CliError::Domain(socnav::Error::InvalidArgument(format!(
            "model expects a non-square {h}x{w} input"
        ))));
    }
    let spec = GridSpec::window(h)?;
    let grid = predict(&model, &scenario, &spec, &RasterStyle::default())?;
    ensure_dir(&cli.out_dir)?;
    let stem = item_stem(&a.scenario);
    grid.save_fgrid(cli.out_dir.join(format!("{stem}.prediction.fgrid")))?;
    grid.save_pgm(cli.out_dir.join(format!("{stem}.prediction.pgm")))?;
    Ok(())
}

enum CostSpec {
    Uniform,
    Weights(PathBuf),
    Prediction(PathBuf),
}

fn parse_cost(s: &str) -> CliResult<CostSpec> {
    if s == "uniform" {
        return Ok(CostSpec::Uniform);
    }
    match s.split_once(':') {
        Some(("weights", f)) if !f.is_empty() => Ok(CostSpec::Weights(f.into())),
        Some(("prediction", f)) if !f.is_empty() => Ok(CostSpec::Prediction(f.into())),
        _ => Err(usage(format!(
            "--cost must be `uniform`, `weights:FILE` or `prediction:FILE`, got {s:?}"
        ))),
    }
}

fn plan_cmd(cli: &Cli, a: &PlanArgs) -> CliResult {
    let cost = parse_cost(&a.cost)?;
    let params = PlannerParams {
        max_iterations: a.iterations,
        bias_fraction: a.bias,
        rng_seed: cli.seed,
        ..PlannerParams::default()
    };
    params.validate().map_err(|e| usage(e.to_string()))?;
    let scenario = load_scenario(&a.scenario)?;
    let (provider, prediction) = match cost {
        CostSpec::Uniform => (CostProvider::Uniform, None),
        CostSpec::Weights(f) => (CostProvider::linear(WeightVector::load(&f)?), None),
        CostSpec::Prediction(f) => {
            let grid = FloatGrid::load_fgrid(&f)?;
            (CostProvider::prediction(grid.clone()), Some(grid))
        }
    };
    let mut planner = Planner::new(&scenario, &provider, prediction.as_ref(), params)?;
    planner.run();
    let edges = planner.edges();
    let result = planner.finish();

    ensure_dir(&cli.out_dir)?;
    let stem = item_stem(&a.scenario);
    write(
        cli.out_dir.join(format!("{stem}.stats.csv")),
        format!("{}\n{}\n", PlanStats::csv_header(), result.stats.csv_row()),
    )?;
    let spec = GridSpec::window(cli.grid_size)?;
    let layers = OverlayLayers {
        tree: !a.no_tree,
        ..OverlayLayers::default()
    };
    let overlay = render_overlay(&scenario, &spec, &edges, result.path.as_ref(), layers)?;
    overlay.save_pgm(cli.out_dir.join(format!("{stem}.overlay.pgm")))?;
    if result.stats.sampler.is_fallback() {
        log::warn!(
            "prediction could not bias sampling ({:?}); sampled uniformly",
            result.stats.sampler
        );
    }
    let path: Path = result.into_path()?;
    path.save_csv(cli.out_dir.join(format!("{stem}.path.csv")))?;
    Ok(())
}

fn train_irl(cli: &Cli, a: &TrainIrlArgs) -> CliResult {
    let config = IrlConfig {
        iterations: a.iterations,
        learning_rate: a.lr,
        planner: PlannerParams {
            max_iterations: a.planner_iterations,
            ..PlannerParams::default()
        },
        runs_per_demo: a.runs,
        margin_loss_weight: a.margin,
        step_decay: a.step_decay,
        seed: cli.seed,
        update: if a.exponentiated {
            UpdateRule::Exponentiated
        } else {
            UpdateRule::Projected
        },
        ..IrlConfig::default()
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    let demos = Demonstration::load_dir(&a.demos, config.planner.goal_tolerance)?;
    let (name, result) = match a.algo {
        Algo::Rtirl => ("rtirl", rtirl_train(&demos, &config)?),
        Algo::Rlt => ("rlt", rlt_train(&demos, &config)?),
    };
    ensure_dir(&cli.out_dir)?;
    result
        .weights
        .save(cli.out_dir.join(format!("{name}.weights.csv")))?;
    result.save_log(cli.out_dir.join(format!("{name}.log.csv")))?;
    println!("learned weights {:?}", result.weights.as_array());
    Ok(())
}

fn eval(cli: &Cli, a: &EvalArgs) -> CliResult {
    let mut plans: Vec<PathBuf> = std::fs::read_dir(&a.plans)
        .map_err(|e| io_err(&a.plans, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(".path.csv"))
        .collect();
    plans.sort();
    if plans.is_empty() {
        return Err(CliError::Domain(socnav::Error::parse(
            &a.plans,
            "no .path.csv files",
        )));
    }
    let mut items = Vec::with_capacity(plans.len());
    for plan_file in plans {
        let id = item_stem(&plan_file);
        let expert_file = a.experts.join(format!("{id}.path.csv"));
        let scenario_file = a.scenarios.join(format!("{id}.scenario.json"));
        items.push(EvalItem {
            id,
            plan: Path::load_csv(&plan_file)?,
            expert: Path::load_csv(&expert_file)?,
            scenario: Scenario::load(&scenario_file)?,
        });
    }
    let report = EvalReport::evaluate(&items, &FeatureParams::default(), Execution::Parallel);
    report.write(&cli.out_dir, &a.name)?;
    let mu = report.mu_summary();
    println!(
        "{} trajectories, mean mu {:.4} ± {:.4}",
        mu.n, mu.mean, mu.std_err
    );
    Ok(())
}
