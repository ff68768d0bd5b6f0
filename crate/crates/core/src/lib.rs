//! Learning-from-demonstration path planning for social robot navigation.
//!
//! A fully convolutional network learns to draw the path to the goal on a
//! robot-centred raster of obstacles, people and goal. Its prediction then
//! shapes an RRT* planner twice: as the traversal cost and as the source of a
//! fixed share of the planner's samples. Two IRL baselines over hand-crafted
//! social features and the path-comparison metrics used to evaluate them live
//! alongside.

pub mod dataset;
pub mod error;
pub mod exec;
pub mod fcn;
pub mod features;
pub mod geometry;
pub mod grid;
pub mod irl;
pub mod metrics;
pub mod path;
pub mod planner;
pub mod raster;
pub mod scenario;

pub use error::{Error, Result};
pub use exec::Execution;
pub use features::{FeatureParams, FeatureVector, WeightVector};
pub use geometry::{Point, Pose2D};
pub use grid::{FloatGrid, GridSpec};
pub use path::Path;
pub use planner::{plan, CostProvider, PlanResult, PlanStats, PlannerParams};
pub use scenario::Scenario;
