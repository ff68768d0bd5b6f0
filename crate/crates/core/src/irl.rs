//! Feature-weight learning from demonstrations with RRT* in the loop:
//! a max-entropy style trainer (`rtirl`) and a max-margin one (`rlt`).

use std::path::Path as FsPath;

use crate::error::{Error, Result};
use crate::exec::{derive_seed, Execution};
use crate::features::{
    feature_count, FeatureParams, FeatureVector, WeightVector, FEATURE_COUNT, FEATURE_NAMES,
};
use crate::path::Path;
use crate::planner::{plan, CostProvider, PlannerParams, DEFAULT_CORRIDOR};
use crate::scenario::Scenario;

/// Maximum distance between an expert path's first point and the robot.
const START_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Demonstration {
    pub scenario: Scenario,
    pub expert_path: Path,
}

impl Demonstration {
    /// Checks that the path starts at the robot and ends within
    /// `goal_tolerance` of the goal.
    pub fn new(scenario: Scenario, expert_path: Path, goal_tolerance: f64) -> Result<Self> {
        if expert_path.start().distance(scenario.start()) > START_TOLERANCE {
            return Err(Error::InvalidArgument(
                "expert path does not start at the robot".into(),
            ));
        }
        if expert_path.end().distance(scenario.goal_point()) > goal_tolerance {
            return Err(Error::InvalidArgument(
                "expert path does not reach the goal".into(),
            ));
        }
        Ok(Demonstration {
            scenario,
            expert_path,
        })
    }

    /// Loads every `<stem>.scenario.json` with a matching `<stem>.path.csv`
    /// in `dir`, ordered by stem.
    pub fn load_dir(dir: impl AsRef<FsPath>, goal_tolerance: f64) -> Result<Vec<Demonstration>> {
        let dir = dir.as_ref();
        let mut stems = Vec::new();
        for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(stem) = name.strip_suffix(".scenario.json") {
                stems.push(stem.to_owned());
            }
        }
        stems.sort();
        let mut demos = Vec::with_capacity(stems.len());
        for stem in stems {
            let path_file = dir.join(format!("{stem}.path.csv"));
            if !path_file.exists() {
                continue;
            }
            let scenario = Scenario::load(dir.join(format!("{stem}.scenario.json")))?;
            let path = Path::load_csv(&path_file)?;
            demos.push(
                Demonstration::new(scenario, path, goal_tolerance)
                    .map_err(|e| Error::parse(&path_file, e.to_string()))?,
            );
        }
        if demos.is_empty() {
            return Err(Error::parse(dir, "no scenario/path pairs found"));
        }
        Ok(demos)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateRule {
    /// Additive step, clip at zero, renormalise.
    Projected,
    /// Multiplicative step, renormalise.
    Exponentiated,
}

#[derive(Debug, Clone)]
pub struct IrlConfig {
    pub iterations: usize,
    pub learning_rate: f64,
    pub planner: PlannerParams,
    /// Planner runs averaged per demonstration and iteration.
    pub runs_per_demo: usize,
    /// Loss subtracted off the expert corridor (max-margin trainer only).
    pub margin_loss_weight: f64,
    pub corridor: f64,
    pub seed: u64,
    pub features: FeatureParams,
    pub update: UpdateRule,
    /// Shrink the step as `learning_rate / sqrt(1 + iteration)`.
    pub step_decay: bool,
    pub initial_weights: WeightVector,
    pub execution: Execution,
}

impl Default for IrlConfig {
    fn default() -> Self {
        IrlConfig {
            iterations: 30,
            learning_rate: 0.1,
            planner: PlannerParams::default(),
            runs_per_demo: 5,
            margin_loss_weight: 0.5,
            corridor: DEFAULT_CORRIDOR,
            seed: 0,
            features: FeatureParams::default(),
            update: UpdateRule::Projected,
            step_decay: false,
            initial_weights: WeightVector::uniform(),
            execution: Execution::default(),
        }
    }
}

impl IrlConfig {
    pub fn validate(&self) -> Result<()> {
        self.planner.validate()?;
        if self.iterations == 0 || self.runs_per_demo == 0 {
            return Err(Error::InvalidArgument(
                "iterations and runs per demo must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0)
            || !(self.margin_loss_weight >= 0.0)
            || !(self.corridor > 0.0)
        {
            return Err(Error::InvalidArgument(
                "learning rate and corridor must be positive, margin weight non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    /// Weights the iteration's plans were made with.
    pub weights: WeightVector,
    pub gradient: FeatureVector,
    /// Mean over demos of the mean absolute feature-count difference between
    /// this iteration's plans and the expert.
    pub feature_error: f64,
    pub failed_demos: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrlResult {
    pub weights: WeightVector,
    pub log: Vec<IterationLog>,
}

impl IrlResult {
    pub fn log_csv(&self) -> String {
        let mut out = String::from("iteration,gradient_norm,feature_error,failed_demos");
        for n in FEATURE_NAMES {
            out.push_str(&format!(",w_{n}"));
        }
        out.push('\n');
        for l in &self.log {
            out.push_str(&format!(
                "{},{},{},{}",
                l.iteration,
                l.gradient.l2_norm(),
                l.feature_error,
                l.failed_demos
            ));
            for w in l.weights.as_array() {
                out.push_str(&format!(",{w}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn save_log(&self, path: impl AsRef<FsPath>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.log_csv()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Trainer {
    MaxEnt,
    MaxMargin,
}

/// Per-demo feature counts under `provider_for(demo)`, averaged over `runs`
/// planner runs; `None` for demos where every run failed.
fn mean_plan_counts(
    demos: &[Demonstration],
    config: &IrlConfig,
    runs: usize,
    seed_path: &[u64],
    provider_for: impl Fn(&Demonstration) -> CostProvider + Sync + Send,
) -> Vec<Option<FeatureVector>> {
    config
        .execution
        .map_range(demos.len() * runs, |job| {
            let (d, k) = (job / runs, job % runs);
            let demo = &demos[d];
            let mut path_seed = seed_path.to_vec();
            path_seed.extend([d as u64, k as u64]);
            let params = config
                .planner
                .with_seed(derive_seed(config.seed, &path_seed));
            let provider = provider_for(demo);
            match plan(&demo.scenario, &provider, None, &params).and_then(|r| r.into_path()) {
                Ok(p) => Some(feature_count(&p, &demo.scenario, &config.features)),
                Err(e) => {
                    log::warn!("demo {d} run {k}: {e}");
                    None
                }
            }
        })
        .chunks(runs)
        .map(|chunk| {
            let ok: Vec<_> = chunk.iter().flatten().collect();
            if ok.is_empty() {
                return None;
            }
            let mut sum = FeatureVector::ZERO;
            for f in &ok {
                sum += **f;
            }
            Some(sum * (1.0 / ok.len() as f64))
        })
        .collect()
}

fn update(w: &WeightVector, step: FeatureVector, rule: UpdateRule) -> WeightVector {
    let w = w.as_array();
    let mut raw = [0.0; FEATURE_COUNT];
    for i in 0..FEATURE_COUNT {
        raw[i] = match rule {
            UpdateRule::Projected => w[i] + step[i],
            UpdateRule::Exponentiated => w[i] * step[i].exp(),
        };
    }
    WeightVector::project(raw)
}

fn train(demos: &[Demonstration], config: &IrlConfig, trainer: Trainer) -> Result<IrlResult> {
    if demos.is_empty() {
        return Err(Error::InvalidArgument("no demonstrations".into()));
    }
    config.validate()?;
    let expert: Vec<FeatureVector> = demos
        .iter()
        .map(|d| feature_count(&d.expert_path, &d.scenario, &config.features))
        .collect();
    let mut w = config.initial_weights;
    let mut log = Vec::with_capacity(config.iterations);
    for iteration in 0..config.iterations {
        let tag = [iteration as u64];
        let counts = match trainer {
            Trainer::MaxEnt => mean_plan_counts(demos, config, config.runs_per_demo, &tag, |_| {
                CostProvider::LinearFeatures {
                    weights: w,
                    params: config.features,
                }
            }),
            Trainer::MaxMargin => {
                mean_plan_counts(demos, config, 1, &tag, |d| CostProvider::LossAugmented {
                    weights: w,
                    params: config.features,
                    expert: d.expert_path.clone(),
                    margin_weight: config.margin_loss_weight,
                    corridor: config.corridor,
                })
            }
        };
        let mut gradient = FeatureVector::ZERO;
        let mut error = 0.0;
        let mut used = 0usize;
        for (c, e) in counts.iter().zip(&expert) {
            if let Some(c) = c {
                gradient += *c - *e;
                error += c.mean_abs_diff(e);
                used += 1;
            }
        }
        if used == 0 {
            return Err(Error::AllDemosFailed { iteration });
        }
        gradient = gradient * (1.0 / used as f64);
        error /= used as f64;
        log::info!(
            "iteration {iteration}: |g| = {:.5}, feature error {error:.5}, {} failed",
            gradient.l2_norm(),
            demos.len() - used
        );
        log.push(IterationLog {
            iteration,
            weights: w,
            gradient,
            feature_error: error,
            failed_demos: demos.len() - used,
        });
        // Features the planner over-uses relative to the expert become more
        // expensive; under-used ones cheaper.
        let rate = if config.step_decay {
            config.learning_rate / (1.0 + iteration as f64).sqrt()
        } else {
            config.learning_rate
        };
        w = update(&w, gradient * rate, config.update);
    }
    Ok(IrlResult { weights: w, log })
}

/// Max-entropy style trainer: the expected plan feature counts are
/// approximated by averaging `runs_per_demo` RRT* runs.
pub fn rtirl_train(demos: &[Demonstration], config: &IrlConfig) -> Result<IrlResult> {
    train(demos, config, Trainer::MaxEnt)
}

/// Max-margin trainer: one loss-augmented RRT* plan per demo and iteration.
pub fn rlt_train(demos: &[Demonstration], config: &IrlConfig) -> Result<IrlResult> {
    train(demos, config, Trainer::MaxMargin)
}

/// Mean over demos of the feature-count error of plain plans under
/// `weights`, each demo averaged over `runs` planner runs. `tag` separates
/// the seed streams of different evaluations.
pub fn feature_count_error(
    demos: &[Demonstration],
    weights: &WeightVector,
    config: &IrlConfig,
    runs: usize,
    tag: u64,
) -> Result<f64> {
    let counts = mean_plan_counts(demos, config, runs.max(1), &[u64::MAX, tag], |_| {
        CostProvider::LinearFeatures {
            weights: *weights,
            params: config.features,
        }
    });
    let mut total = 0.0;
    let mut used = 0;
    for (c, d) in counts.iter().zip(demos) {
        if let Some(c) = c {
            total += c.mean_abs_diff(&feature_count(
                &d.expert_path,
                &d.scenario,
                &config.features,
            ));
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::AllDemosFailed { iteration: 0 });
    }
    Ok(total / used as f64)
}
