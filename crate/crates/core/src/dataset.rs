//! Synthetic scenarios, expert demonstrations and the on-disk dataset layout.
//!
//! A dataset directory holds `train/`, `validation/` and `test/` folders with
//! `<index>.scenario.json`, `<index>.path.csv`, `<index>.input.fgrid` and
//! `<index>.label.fgrid` per item, a `manifest.csv` listing every item and a
//! `generator.json` with the settings (expert weights included).

use std::f64::consts::PI;
use std::path::{Path as FsPath, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::{derive_seed, Execution};
use crate::fcn::Sample;
use crate::features::{FeatureParams, WeightVector, FEATURE_NAMES};
use crate::geometry::{Point, Pose2D};
use crate::grid::{FloatGrid, GridSpec};
use crate::irl::Demonstration;
use crate::path::Path;
use crate::planner::{plan, CostProvider, PlannerParams};
use crate::raster::{encode_input_raster, rasterize_world_path, RasterStyle};
use crate::scenario::{Person, RectObstacle, Scenario, WINDOW_HALF};

/// Consecutive rejected draws before generation gives up.
pub const MAX_REJECTIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        Split::ALL.into_iter().find(|x| x.name() == s)
    }
}

#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub people_range: (usize, usize),
    /// Upper bound of the per-scenario rectangle count (drawn from 0..=n).
    pub obstacle_density: usize,
    /// Side length range of the rectangles, metres.
    pub obstacle_size: (f64, f64),
    pub goal_distance: (f64, f64),
    /// Share of people placed next to the straight robot-goal line rather than
    /// anywhere in the window.
    pub people_near_route: f64,
    pub expert_weights: WeightVector,
    pub expert_planner: PlannerParams,
    pub feasibility_iterations: usize,
    pub features: FeatureParams,
    pub grid_size: usize,
    /// (train, validation, test) counts.
    pub split: (usize, usize, usize),
    pub seed: u64,
    /// Seed of the split assignment; defaults to `seed`.
    pub split_seed: Option<u64>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            people_range: (0, 5),
            obstacle_density: 3,
            obstacle_size: (0.3, 1.5),
            goal_distance: (2.0, 4.5),
            people_near_route: 0.0,
            expert_weights: WeightVector::new([0.3, 0.25, 0.15, 0.15, 0.15])
                .expect("valid weights"),
            expert_planner: PlannerParams::default(),
            feasibility_iterations: 2000,
            features: FeatureParams::default(),
            grid_size: 64,
            split: (400, 50, 50),
            seed: 0,
            split_seed: None,
        }
    }
}

impl GeneratorConfig {
    pub fn scenario_count(&self) -> usize {
        self.split.0 + self.split.1 + self.split.2
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::window(self.grid_size)
    }

    pub fn validate(&self) -> Result<()> {
        self.expert_planner.validate()?;
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.scenario_count() == 0 {
            return bad("the split counts sum to zero");
        }
        if self.people_range.0 > self.people_range.1 {
            return bad("people range is reversed");
        }
        let (lo, hi) = self.goal_distance;
        if !(lo > 0.0 && lo <= hi && hi < WINDOW_HALF) {
            return bad("goal distance range must lie in (0, 5) m");
        }
        let (lo, hi) = self.obstacle_size;
        if !(lo > 0.0 && lo <= hi) {
            return bad("obstacle size range must be positive");
        }
        if !(0.0..=1.0).contains(&self.people_near_route) {
            return bad("people_near_route must lie in [0, 1]");
        }
        if self.feasibility_iterations == 0 {
            return bad("feasibility iterations must be positive");
        }
        if self.grid_size == 0 || self.grid_size % 8 != 0 {
            return bad("grid size must be a positive multiple of 8");
        }
        Ok(())
    }

    fn item_seed(&self, index: usize) -> u64 {
        derive_seed(self.seed, &[index as u64])
    }

    pub fn to_json(&self) -> String {
        let weights: serde_json::Map<String, serde_json::Value> = FEATURE_NAMES
            .iter()
            .zip(self.expert_weights.as_array())
            .map(|(n, w)| (n.to_string(), (*w).into()))
            .collect();
        let value = serde_json::json!({
            "people_range": [self.people_range.0, self.people_range.1],
            "obstacle_density": self.obstacle_density,
            "obstacle_size": [self.obstacle_size.0, self.obstacle_size.1],
            "goal_distance": [self.goal_distance.0, self.goal_distance.1],
            "people_near_route": self.people_near_route,
            "expert_weights": weights,
            "expert_planner": self.expert_planner,
            "feasibility_iterations": self.feasibility_iterations,
            "grid_size": self.grid_size,
            "split": { "train": self.split.0, "validation": self.split.1, "test": self.split.2 },
            "seed": self.seed,
            "split_seed": self.split_seed.unwrap_or(self.seed),
        });
        serde_json::to_string_pretty(&value).expect("plain JSON") + "\n"
    }
}

fn random_heading(rng: &mut impl Rng) -> f64 {
    // (-π, π]
    PI - rng.gen_range(0.0..2.0 * PI)
}

fn draw_scenario(config: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Scenario {
    let robot = Pose2D::new(
        rng.gen_range(-20.0..20.0),
        rng.gen_range(-20.0..20.0),
        random_heading(rng),
    );
    let d = rng.gen_range(config.goal_distance.0..=config.goal_distance.1);
    let bearing = random_heading(rng);
    let goal_local = Point::new(d * bearing.cos(), d * bearing.sin());
    let to_world = |p: Point| robot.to_world(p);
    let goal = to_world(goal_local);
    let mut s = Scenario::new(robot, Pose2D::new(goal.x, goal.y, random_heading(rng)));

    let n_rects = rng.gen_range(0..=config.obstacle_density);
    for _ in 0..n_rects {
        let c = to_world(Point::new(
            rng.gen_range(-WINDOW_HALF..WINDOW_HALF),
            rng.gen_range(-WINDOW_HALF..WINDOW_HALF),
        ));
        let (lo, hi) = config.obstacle_size;
        let (w, h) = (rng.gen_range(lo..=hi), rng.gen_range(lo..=hi));
        s = s.with_rect(RectObstacle::new(
            c.x - w / 2.0,
            c.y - h / 2.0,
            c.x + w / 2.0,
            c.y + h / 2.0,
        ));
    }

    let n_people = rng.gen_range(config.people_range.0..=config.people_range.1);
    for _ in 0..n_people {
        let local = if rng.gen_bool(config.people_near_route) {
            let t = rng.gen_range(0.25..0.75);
            let offset = rng.gen_range(-0.6..0.6);
            let normal = Point::new(-goal_local.y, goal_local.x) * (1.0 / d);
            goal_local * t + normal * offset
        } else {
            Point::new(
                rng.gen_range(-WINDOW_HALF..WINDOW_HALF),
                rng.gen_range(-WINDOW_HALF..WINDOW_HALF),
            )
        };
        let p = to_world(local);
        s = s.with_person(Person::new(Pose2D::new(p.x, p.y, random_heading(rng))));
    }
    s
}

fn rejection_reason(s: &Scenario, config: &GeneratorConfig, seed: u64) -> Option<String> {
    if let Err(e) = s.validate() {
        return Some(e.to_string());
    }
    let start = s.start();
    let goal = s.goal_point();
    if s.people.iter().any(|p| {
        p.pose.position().distance(start) <= p.body_radius
            || p.pose.position().distance(goal) <= p.body_radius
    }) {
        return Some("a person stands on the robot or the goal".into());
    }
    let params = PlannerParams {
        max_iterations: config.feasibility_iterations,
        ..config.expert_planner
    }
    .with_seed(seed);
    match plan(s, &CostProvider::Uniform, None, &params) {
        Ok(r) if r.path.is_some() => None,
        Ok(_) => Some("feasibility check found no path".into()),
        Err(e) => Some(e.to_string()),
    }
}

/// Draws scenarios from `rng` until one passes validation and the
/// uniform-cost feasibility check.
fn next_scenario(config: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Result<Scenario> {
    let mut last = String::new();
    for _ in 0..MAX_REJECTIONS {
        let s = draw_scenario(config, rng);
        match rejection_reason(&s, config, rng.gen()) {
            None => return Ok(s),
            Some(r) => last = r,
        }
    }
    Err(Error::GenerationFailed {
        attempts: MAX_REJECTIONS,
        reason: last,
    })
}

/// Scenario number `index` of the stream defined by `config.seed`.
pub fn generate_scenario(config: &GeneratorConfig, index: usize) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.item_seed(index));
    next_scenario(config, &mut rng)
}

/// A demonstration with its network training pair.
#[derive(Debug, Clone)]
pub struct DemoItem {
    pub demonstration: Demonstration,
    pub input: FloatGrid,
    pub label: FloatGrid,
    pub expert_cost: f64,
}

/// Plans the expert path under the expert weights and renders the raster pair.
pub fn generate_demonstration(
    scenario: &Scenario,
    config: &GeneratorConfig,
    planner_seed: u64,
) -> Result<DemoItem> {
    let provider = CostProvider::LinearFeatures {
        weights: config.expert_weights,
        params: config.features,
    };
    let result = plan(
        scenario,
        &provider,
        None,
        &config.expert_planner.with_seed(planner_seed),
    )?;
    let expert_cost = result.stats.final_cost;
    let path = result.into_path()?;
    let spec = config.grid_spec()?;
    let input = encode_input_raster(scenario, &spec, &RasterStyle::default())?;
    let label = rasterize_world_path(&path, scenario, &spec)?;
    let demonstration =
        Demonstration::new(scenario.clone(), path, config.expert_planner.goal_tolerance)?;
    Ok(DemoItem {
        demonstration,
        input,
        label,
        expert_cost,
    })
}

/// Item `index`: scenarios whose expert plan fails are discarded and redrawn
/// from the same stream.
pub fn generate_item(config: &GeneratorConfig, index: usize) -> Result<DemoItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.item_seed(index));
    for _ in 0..MAX_REJECTIONS {
        let scenario = next_scenario(config, &mut rng)?;
        match generate_demonstration(&scenario, config, rng.gen()) {
            Ok(item) => return Ok(item),
            Err(e) => log::info!("item {index}: discarding scenario ({e})"),
        }
    }
    Err(Error::GenerationFailed {
        attempts: MAX_REJECTIONS,
        reason: "expert planner kept failing".into(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub index: usize,
    pub split: Split,
    pub scenario_file: PathBuf,
    pub input_grid: PathBuf,
    pub label_grid: PathBuf,
    pub path_file: PathBuf,
    pub seed: u64,
    pub expert_cost: f64,
}

const MANIFEST_HEADER: [&str; 8] = [
    "index",
    "split",
    "scenario_file",
    "input_grid",
    "label_grid",
    "path_file",
    "seed",
    "expert_cost",
];

/// Item list of a dataset directory. File paths are relative to `root`.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(MANIFEST_HEADER).expect("in-memory write");
        for e in &self.entries {
            w.write_record([
                e.index.to_string(),
                e.split.name().to_string(),
                e.scenario_file.display().to_string(),
                e.input_grid.display().to_string(),
                e.label_grid.display().to_string(),
                e.path_file.display().to_string(),
                e.seed.to_string(),
                e.expert_cost.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    pub fn load(root: impl AsRef<FsPath>) -> Result<Manifest> {
        let root = root.as_ref();
        let file = root.join("manifest.csv");
        let text = std::fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| Error::parse(&file, e.to_string()))?;
        if header.iter().ne(MANIFEST_HEADER) {
            return Err(Error::parse(&file, "unexpected manifest columns"));
        }
        let mut entries = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let r = record.map_err(|e| Error::parse(&file, e.to_string()))?;
            let bad = |what: &str| Error::parse(&file, format!("row {}: bad {what}", line + 1));
            entries.push(ManifestEntry {
                index: r[0].parse().map_err(|_| bad("index"))?,
                split: Split::parse(&r[1]).ok_or_else(|| bad("split"))?,
                scenario_file: r[2].into(),
                input_grid: r[3].into(),
                label_grid: r[4].into(),
                path_file: r[5].into(),
                seed: r[6].parse().map_err(|_| bad("seed"))?,
                expert_cost: r[7].parse().map_err(|_| bad("expert_cost"))?,
            });
        }
        Ok(Manifest {
            root: root.to_path_buf(),
            entries,
        })
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Network training pairs of one split.
    pub fn load_samples(&self, split: Split) -> Result<Vec<Sample>> {
        self.split(split)
            .map(|e| {
                let input = FloatGrid::load_fgrid(self.root.join(&e.input_grid))?;
                let label = FloatGrid::load_fgrid(self.root.join(&e.label_grid))?;
                Ok(Sample::from_grids(&input, &label))
            })
            .collect()
    }

    pub fn load_demonstrations(
        &self,
        split: Split,
        goal_tolerance: f64,
    ) -> Result<Vec<Demonstration>> {
        self.split(split)
            .map(|e| {
                let scenario = Scenario::load(self.root.join(&e.scenario_file))?;
                let path = Path::load_csv(self.root.join(&e.path_file))?;
                Demonstration::new(scenario, path, goal_tolerance)
            })
            .collect()
    }
}

/// Split of every index: a seeded shuffle, then the first `train` indices go
/// to training, the next `validation` to validation and the rest to test.
pub fn assign_splits(config: &GeneratorConfig) -> Vec<Split> {
    let n = config.scenario_count();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        config.split_seed.unwrap_or(config.seed),
        &[u64::MAX],
    ));
    order.shuffle(&mut rng);
    let mut splits = vec![Split::Test; n];
    for (rank, &i) in order.iter().enumerate() {
        splits[i] = if rank < config.split.0 {
            Split::Train
        } else if rank < config.split.0 + config.split.1 {
            Split::Validation
        } else {
            Split::Test
        };
    }
    splits
}

fn write_item(root: &FsPath, split: Split, index: usize, item: &DemoItem) -> Result<[PathBuf; 4]> {
    let dir = root.join(split.name());
    let rel = |ext: &str| PathBuf::from(split.name()).join(format!("{index:05}.{ext}"));
    let files = [
        rel("scenario.json"),
        rel("input.fgrid"),
        rel("label.fgrid"),
        rel("path.csv"),
    ];
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    item.demonstration.scenario.save(root.join(&files[0]))?;
    item.input.save_fgrid(root.join(&files[1]))?;
    item.label.save_fgrid(root.join(&files[2]))?;
    item.demonstration
        .expert_path
        .save_csv(root.join(&files[3]))?;
    Ok(files)
}

/// Generates every item (in parallel when allowed), then writes files, the
/// manifest and the generator settings from a single thread.
pub fn build_dataset(
    config: &GeneratorConfig,
    out_dir: impl AsRef<FsPath>,
    exec: Execution,
) -> Result<Manifest> {
    config.validate()?;
    let root = out_dir.as_ref();
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let splits = assign_splits(config);
    let items = exec.map_range(config.scenario_count(), |i| generate_item(config, i));
    let mut entries = Vec::with_capacity(items.len());
    for (index, item) in items.into_iter().enumerate() {
        let item = item?;
        let split = splits[index];
        let [scenario_file, input_grid, label_grid, path_file] =
            write_item(root, split, index, &item)?;
        entries.push(ManifestEntry {
            index,
            split,
            scenario_file,
            input_grid,
            label_grid,
            path_file,
            seed: config.item_seed(index),
            expert_cost: item.expert_cost,
        });
    }
    let manifest = Manifest {
        root: root.to_path_buf(),
        entries,
    };
    let file = root.join("manifest.csv");
    std::fs::write(&file, manifest.to_csv()).map_err(|e| Error::io(&file, e))?;
    let file = root.join("generator.json");
    std::fs::write(&file, config.to_json()).map_err(|e| Error::io(&file, e))?;
    Ok(manifest)
}
