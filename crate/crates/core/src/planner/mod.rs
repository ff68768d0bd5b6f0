//! RRT* over the local window with pluggable state costs and a sampler that can
//! be partially biased toward a predicted path.

mod cost;
mod index;
mod sampler;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use cost::{
    CostProvider, DEFAULT_CORRIDOR, DEFAULT_PREDICTION_GAIN, EDGE_STEP, LOSS_AUGMENTED_FLOOR,
};
pub use sampler::{BiasedSampler, Sample, SamplerDiagnostic, UNINFORMATIVE_SUPPORT};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::grid::FloatGrid;
use crate::path::Path;
use crate::scenario::Scenario;
use index::SpatialIndex;

/// Relative margin on cost lower bounds, covering integration round-off.
const PRUNE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlannerParams {
    pub max_iterations: usize,
    pub steer_step: f64,
    pub goal_tolerance: f64,
    pub rewire_gamma: f64,
    pub bias_fraction: f64,
    pub bias_threshold: f64,
    pub rng_seed: u64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        PlannerParams {
            max_iterations: 5000,
            steer_step: 0.25,
            goal_tolerance: 0.15,
            rewire_gamma: 15.0,
            bias_fraction: 0.7,
            bias_threshold: 0.2,
            rng_seed: 0,
        }
    }
}

impl PlannerParams {
    pub fn with_seed(self, rng_seed: u64) -> Self {
        PlannerParams { rng_seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("steer_step", self.steer_step),
            ("goal_tolerance", self.goal_tolerance),
            ("rewire_gamma", self.rewire_gamma),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "max_iterations must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.bias_fraction) {
            return Err(Error::InvalidArgument(format!(
                "bias_fraction must lie in [0, 1], got {}",
                self.bias_fraction
            )));
        }
        if !(self.bias_threshold > 0.0 && self.bias_threshold < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "bias_threshold must lie in (0, 1), got {}",
                self.bias_threshold
            )));
        }
        Ok(())
    }

    /// Rewiring radius for a tree holding `n` nodes.
    pub fn near_radius(&self, n: usize) -> f64 {
        let n = n.max(2) as f64;
        (self.steer_step * 4.0).min(self.rewire_gamma * (n.ln() / n).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub state: Point,
    pub parent: Option<usize>,
    pub cost_to_come: f64,
    /// Cost of the edge from the parent (0 for the root).
    pub edge_cost: f64,
    state_cost: f64,
    children: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanStats {
    pub iterations: usize,
    pub tree_size: usize,
    /// Best cost to the goal, +∞ when no path was found.
    pub final_cost: f64,
    pub biased_samples: usize,
    pub sampler: SamplerDiagnostic,
}

impl PlanStats {
    pub fn csv_header() -> &'static str {
        "iterations,tree_size,final_cost,biased_samples,sampler"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:?}",
            self.iterations, self.tree_size, self.final_cost, self.biased_samples, self.sampler
        )
    }
}

/// Outcome of a planning query; `path` is `None` when the goal was never reached.
#[derive(Debug, Clone)]
pub struct PlanResult {
    pub path: Option<Path>,
    pub stats: PlanStats,
}

impl PlanResult {
    pub fn into_path(self) -> Result<Path> {
        self.path.ok_or(Error::NoPathFound {
            iterations: self.stats.iterations,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct GoalLink {
    node: usize,
    edge_cost: f64,
}

/// Incremental RRT* planner. One instance answers one query.
pub struct Planner<'a> {
    scenario: &'a Scenario,
    provider: &'a CostProvider,
    params: PlannerParams,
    sampler: BiasedSampler,
    rng: ChaCha8Rng,
    nodes: Vec<TreeNode>,
    index: SpatialIndex,
    goal_links: Vec<GoalLink>,
    iterations: usize,
    biased_samples: usize,
}

impl<'a> Planner<'a> {
    pub fn new(
        scenario: &'a Scenario,
        provider: &'a CostProvider,
        prediction: Option<&FloatGrid>,
        params: PlannerParams,
    ) -> Result<Self> {
        params.validate()?;
        let start = scenario.start();
        let goal = scenario.goal_point();
        if scenario.point_in_collision(start) {
            return Err(Error::InvalidScenario("start is in collision".into()));
        }
        if scenario.point_in_collision(goal) {
            return Err(Error::InvalidScenario("goal is in collision".into()));
        }
        if !scenario.in_window(goal) {
            return Err(Error::InvalidScenario(
                "goal lies outside the local window".into(),
            ));
        }
        let sampler = BiasedSampler::new(prediction, params.bias_fraction, params.bias_threshold);
        let root_cost = provider.state_cost(scenario, start);
        let mut planner = Planner {
            scenario,
            provider,
            params,
            sampler,
            rng: ChaCha8Rng::seed_from_u64(params.rng_seed),
            nodes: Vec::with_capacity(params.max_iterations + 1),
            index: SpatialIndex::new(params.steer_step.max(0.25) * 2.0),
            goal_links: Vec::new(),
            iterations: 0,
            biased_samples: 0,
        };
        planner.nodes.push(TreeNode {
            state: start,
            parent: None,
            cost_to_come: 0.0,
            edge_cost: 0.0,
            state_cost: root_cost,
            children: Vec::new(),
        });
        planner.index.insert(0, scenario.to_local(start));
        planner.try_link_goal(0);
        Ok(planner)
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn sampler_diagnostic(&self) -> SamplerDiagnostic {
        self.sampler.diagnostic()
    }

    /// Tree edges as (parent, child) world points.
    pub fn edges(&self) -> Vec<(Point, Point)> {
        self.nodes
            .iter()
            .filter_map(|n| n.parent.map(|p| (self.nodes[p].state, n.state)))
            .collect()
    }

    pub fn best_cost(&self) -> f64 {
        self.best_link().map_or(f64::INFINITY, |(_, c)| c)
    }

    fn best_link(&self) -> Option<(GoalLink, f64)> {
        let mut best: Option<(GoalLink, f64)> = None;
        for link in &self.goal_links {
            let total = self.nodes[link.node].cost_to_come + link.edge_cost;
            if best.map_or(true, |(_, c)| total < c) {
                best = Some((*link, total));
            }
        }
        best
    }

    fn try_link_goal(&mut self, node: usize) {
        let goal = self.scenario.goal_point();
        let state = self.nodes[node].state;
        // The goal is joined like any other steer target, so the returned
        // path always ends exactly on it.
        if state.distance(goal) > self.params.steer_step.max(self.params.goal_tolerance) {
            return;
        }
        let goal_cost = self.provider.state_cost(self.scenario, goal);
        let edge_cost = if state == goal {
            0.0
        } else {
            self.provider.edge_cost_with_endpoints(
                self.scenario,
                state,
                self.nodes[node].state_cost,
                goal,
                goal_cost,
            )
        };
        if edge_cost.is_finite() {
            self.goal_links.push(GoalLink { node, edge_cost });
        }
    }

    fn steer(&self, from: Point, to: Point) -> Point {
        let d = from.distance(to);
        if d <= self.params.steer_step {
            to
        } else {
            from.lerp(to, self.params.steer_step / d)
        }
    }

    /// Runs one sample/extend/rewire iteration. Returns the new node, if any.
    pub fn step(&mut self) -> Option<usize> {
        self.iterations += 1;
        let sample = self.sampler.sample(&mut self.rng);
        if sample.biased {
            self.biased_samples += 1;
        }
        let local_target = sample.point;
        let nearest = self.index.nearest(local_target)?;
        let target = self.scenario.to_world(local_target);
        let new_state = self.steer(self.nodes[nearest].state, target);
        if new_state == self.nodes[nearest].state || !self.scenario.in_window(new_state) {
            return None;
        }
        let new_state_cost = self.provider.state_cost(self.scenario, new_state);
        if !new_state_cost.is_finite() {
            return None;
        }

        let new_local = self.scenario.to_local(new_state);
        let radius = self.params.near_radius(self.nodes.len() + 1);
        let mut near = self.index.within(new_local, radius);
        if !near.contains(&nearest) {
            near.push(nearest);
        }

        // Choose the parent minimizing cost-to-come. Candidates are visited by
        // lower bound so most edge integrals can be skipped.
        let floor = self.provider.cost_floor();
        let lower: Vec<f64> = near
            .iter()
            .map(|&i| self.nodes[i].cost_to_come + floor * self.nodes[i].state.distance(new_state))
            .collect();
        let mut order: Vec<usize> = (0..near.len()).collect();
        order.sort_by(|&a, &b| lower[a].total_cmp(&lower[b]));
        let mut edges: Vec<Option<f64>> = vec![None; near.len()];
        let mut best: Option<(usize, f64, f64)> = None;
        for &k in &order {
            if best.is_some_and(|(_, _, c)| lower[k] * (1.0 - PRUNE_SLACK) >= c) {
                break;
            }
            let i = near[k];
            let edge = self.edge_to_new(i, new_state, new_state_cost);
            edges[k] = Some(edge);
            if !edge.is_finite() {
                continue;
            }
            let total = self.nodes[i].cost_to_come + edge;
            if best.map_or(true, |(_, _, c)| total < c) {
                best = Some((i, edge, total));
            }
        }
        let (parent, parent_edge, cost) = best?;

        let id = self.nodes.len();
        self.nodes.push(TreeNode {
            state: new_state,
            parent: Some(parent),
            cost_to_come: cost,
            edge_cost: parent_edge,
            state_cost: new_state_cost,
            children: Vec::new(),
        });
        self.nodes[parent].children.push(id);
        self.index.insert(id, new_local);

        // Rewire neighbours through the new node when that is cheaper.
        for (k, &i) in near.iter().enumerate() {
            if i == parent {
                continue;
            }
            let bound = cost + floor * self.nodes[i].state.distance(new_state);
            if bound * (1.0 - PRUNE_SLACK) >= self.nodes[i].cost_to_come {
                continue;
            }
            let edge = match edges[k] {
                Some(e) => e,
                None => self.edge_to_new(i, new_state, new_state_cost),
            };
            if !edge.is_finite() {
                continue;
            }
            let through_new = cost + edge;
            if through_new < self.nodes[i].cost_to_come {
                let old_parent = self.nodes[i].parent.expect("only the root lacks a parent");
                self.nodes[old_parent].children.retain(|&c| c != i);
                self.nodes[id].children.push(i);
                let node = &mut self.nodes[i];
                node.parent = Some(id);
                node.edge_cost = edge;
                node.cost_to_come = through_new;
                self.propagate_costs(i);
            }
        }

        self.try_link_goal(id);
        Some(id)
    }

    fn edge_to_new(&self, i: usize, new_state: Point, new_state_cost: f64) -> f64 {
        let n = &self.nodes[i];
        self.provider
            .edge_cost_with_endpoints(self.scenario, n.state, n.state_cost, new_state, new_state_cost)
    }

    fn propagate_costs(&mut self, from: usize) {
        let mut stack: Vec<usize> = self.nodes[from].children.clone();
        while let Some(i) = stack.pop() {
            let parent = self.nodes[i].parent.expect("child has a parent");
            self.nodes[i].cost_to_come = self.nodes[parent].cost_to_come + self.nodes[i].edge_cost;
            stack.extend_from_slice(&self.nodes[i].children);
        }
    }

    pub fn run(&mut self) {
        while self.iterations < self.params.max_iterations {
            self.step();
        }
    }

    /// Minimum-cost path found so far, with collinear vertices removed.
    pub fn best_path(&self) -> Option<Path> {
        let (link, _) = self.best_link()?;
        let mut points = vec![self.scenario.goal_point()];
        let mut cur = Some(link.node);
        while let Some(i) = cur {
            points.push(self.nodes[i].state);
            cur = self.nodes[i].parent;
        }
        points.reverse();
        let path = Path::from_points_dedup(points).expect("tree path is non-empty");
        Some(path.without_collinear(1e-9))
    }

    pub fn stats(&self) -> PlanStats {
        PlanStats {
            iterations: self.iterations,
            tree_size: self.nodes.len(),
            final_cost: self.best_cost(),
            biased_samples: self.biased_samples,
            sampler: self.sampler.diagnostic(),
        }
    }

    pub fn finish(self) -> PlanResult {
        PlanResult {
            path: self.best_path(),
            stats: self.stats(),
        }
    }
}

/// Runs a full RRT* query.
pub fn plan(
    scenario: &Scenario,
    provider: &CostProvider,
    prediction: Option<&FloatGrid>,
    params: &PlannerParams,
) -> Result<PlanResult> {
    let mut planner = Planner::new(scenario, provider, prediction, *params)?;
    planner.run();
    Ok(planner.finish())
}
