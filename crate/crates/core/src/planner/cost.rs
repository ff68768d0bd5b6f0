use crate::features::{feature_vector, proxemics_breaks, trapezoid, FeatureParams, WeightVector};
use crate::geometry::{point_polyline_distance, Point};
use crate::grid::FloatGrid;
use crate::path::Path;
use crate::scenario::Scenario;

/// Step used to integrate state costs along an edge.
pub const EDGE_STEP: f64 = 0.05;
pub const DEFAULT_PREDICTION_GAIN: f64 = 4.0;
pub const DEFAULT_CORRIDOR: f64 = 0.3;
/// Loss-augmented costs never drop below this.
pub const LOSS_AUGMENTED_FLOOR: f64 = 0.1;

/// Source of per-state traversal costs. Points inside obstacles always cost +∞.
#[derive(Debug, Clone)]
pub enum CostProvider {
    /// Cost 1 everywhere: edge cost is Euclidean length.
    Uniform,
    /// `1 + w·f(x)` over the social features.
    LinearFeatures {
        weights: WeightVector,
        params: FeatureParams,
    },
    /// `1 + gain·(1 - p(x))` with `p` read bilinearly from a robot-frame grid.
    PredictionGrid { grid: FloatGrid, gain: f64 },
    /// Max-margin loss augmentation: states farther than `corridor` from the
    /// expert path get `margin_weight` subtracted from the linear cost.
    LossAugmented {
        weights: WeightVector,
        params: FeatureParams,
        expert: Path,
        margin_weight: f64,
        corridor: f64,
    },
}

impl CostProvider {
    pub fn linear(weights: WeightVector) -> Self {
        CostProvider::LinearFeatures {
            weights,
            params: FeatureParams::default(),
        }
    }

    pub fn prediction(grid: FloatGrid) -> Self {
        CostProvider::PredictionGrid {
            grid,
            gain: DEFAULT_PREDICTION_GAIN,
        }
    }

    pub fn state_cost(&self, scenario: &Scenario, p: Point) -> f64 {
        if scenario.point_in_collision(p) {
            return f64::INFINITY;
        }
        self.free_state_cost(scenario, p)
    }

    /// Lower bound on every free state cost, so an edge costs at least
    /// `cost_floor() * length`.
    pub(crate) fn cost_floor(&self) -> f64 {
        match self {
            CostProvider::Uniform | CostProvider::LinearFeatures { .. } => 1.0,
            CostProvider::PredictionGrid { gain, .. } => 1.0_f64.min(1.0 + gain),
            CostProvider::LossAugmented { margin_weight, .. } => {
                (1.0 - margin_weight).max(LOSS_AUGMENTED_FLOOR)
            }
        }
    }

    /// State cost assuming `p` is already known to be collision-free.
    pub(crate) fn free_state_cost(&self, scenario: &Scenario, p: Point) -> f64 {
        match self {
            CostProvider::Uniform => 1.0,
            CostProvider::LinearFeatures { weights, params } => {
                1.0 + feature_vector(p, scenario, params).dot(weights)
            }
            CostProvider::PredictionGrid { grid, gain } => {
                let v = grid.sample_bilinear(scenario.to_local(p)).clamp(0.0, 1.0);
                1.0 + gain * (1.0 - v)
            }
            CostProvider::LossAugmented {
                weights,
                params,
                expert,
                margin_weight,
                corridor,
            } => {
                let base = 1.0 + feature_vector(p, scenario, params).dot(weights);
                let off_corridor = point_polyline_distance(p, expert.points()) > *corridor;
                let loss = if off_corridor { *margin_weight } else { 0.0 };
                (base - loss).max(LOSS_AUGMENTED_FLOOR)
            }
        }
    }

    /// Trapezoidal integral of the state cost along `a`-`b`; +∞ on collision.
    pub fn edge_cost(&self, scenario: &Scenario, a: Point, b: Point) -> f64 {
        if scenario.point_in_collision(a) || scenario.point_in_collision(b) {
            return f64::INFINITY;
        }
        let ca = self.free_state_cost(scenario, a);
        let cb = self.free_state_cost(scenario, b);
        self.edge_cost_with_endpoints(scenario, a, ca, b, cb)
    }

    /// Same as [`edge_cost`](Self::edge_cost) with the endpoint costs supplied.
    pub(crate) fn edge_cost_with_endpoints(
        &self,
        scenario: &Scenario,
        a: Point,
        ca: f64,
        b: Point,
        cb: f64,
    ) -> f64 {
        if scenario.segment_in_collision(a, b) {
            return f64::INFINITY;
        }
        if matches!(self, CostProvider::Uniform) {
            return a.distance(b);
        }
        let mut breaks = Vec::new();
        if matches!(
            self,
            CostProvider::LinearFeatures { .. } | CostProvider::LossAugmented { .. }
        ) {
            proxemics_breaks(a, b, scenario, &mut breaks);
        }
        trapezoid(a, b, EDGE_STEP, ca, cb, &breaks, |p| {
            self.free_state_cost(scenario, p)
        })
    }
}
