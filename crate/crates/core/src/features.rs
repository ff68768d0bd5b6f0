//! Hand-crafted social navigation features: normalized goal distance, obstacle
//! proximity and three proxemics zones (front, back, sides) around each person.
//! They drive the expert cost, the IRL baselines and the feature-count metric.

use std::fs;
use std::ops::{Add, AddAssign, Index, Mul, Sub};
use std::path::Path as FsPath;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::path::{Path, RESAMPLE_STEP};
use crate::scenario::{Scenario, WINDOW_SIZE};

pub const FEATURE_COUNT: usize = 5;
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "goal_distance",
    "obstacle_proximity",
    "proxemics_front",
    "proxemics_back",
    "proxemics_sides",
];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    pub const ZERO: FeatureVector = FeatureVector([0.0; FEATURE_COUNT]);

    pub fn as_array(&self) -> &[f64; FEATURE_COUNT] {
        &self.0
    }

    pub fn dot(&self, w: &WeightVector) -> f64 {
        self.0.iter().zip(w.0.iter()).map(|(f, w)| f * w).sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Mean absolute component difference.
    pub fn mean_abs_diff(&self, other: &FeatureVector) -> f64 {
        (*self - *other).l1_norm() / FEATURE_COUNT as f64
    }
}

impl Index<usize> for FeatureVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for FeatureVector {
    type Output = FeatureVector;
    fn add(mut self, rhs: FeatureVector) -> FeatureVector {
        self += rhs;
        self
    }
}

impl AddAssign for FeatureVector {
    fn add_assign(&mut self, rhs: FeatureVector) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

impl Sub for FeatureVector {
    type Output = FeatureVector;
    fn sub(self, rhs: FeatureVector) -> FeatureVector {
        FeatureVector(std::array::from_fn(|i| self.0[i] - rhs.0[i]))
    }
}

impl Mul<f64> for FeatureVector {
    type Output = FeatureVector;
    fn mul(self, k: f64) -> FeatureVector {
        FeatureVector(self.0.map(|v| v * k))
    }
}

/// Non-negative feature weights summing to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightVector([f64; FEATURE_COUNT]);

impl WeightVector {
    /// Normalizes raw non-negative weights to unit sum.
    pub fn new(raw: [f64; FEATURE_COUNT]) -> Result<Self> {
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "weights must be finite and non-negative, got {raw:?}"
            )));
        }
        let sum: f64 = raw.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidArgument("weights sum to zero".into()));
        }
        Ok(WeightVector(raw.map(|w| w / sum)))
    }

    pub fn uniform() -> Self {
        WeightVector([1.0 / FEATURE_COUNT as f64; FEATURE_COUNT])
    }

    /// Clips negatives to zero and renormalizes; an all-zero result falls back
    /// to uniform weights.
    pub fn project(raw: [f64; FEATURE_COUNT]) -> Self {
        let clipped = raw.map(|w| if w.is_finite() { w.max(0.0) } else { 0.0 });
        WeightVector::new(clipped).unwrap_or_else(|_| WeightVector::uniform())
    }

    pub fn as_array(&self) -> &[f64; FEATURE_COUNT] {
        &self.0
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,value\n");
        for (name, w) in FEATURE_NAMES.iter().zip(self.0) {
            out.push_str(&format!("{name},{w}\n"));
        }
        out
    }

    pub fn from_csv(text: &str) -> std::result::Result<Self, String> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut raw = [None; FEATURE_COUNT];
        for record in reader.records() {
            let record = record.map_err(|e| e.to_string())?;
            if record.len() != 2 {
                return Err(format!(
                    "expected `name,value`, got {} fields",
                    record.len()
                ));
            }
            if &record[0] == "name" && &record[1] == "value" {
                continue;
            }
            let slot = FEATURE_NAMES
                .iter()
                .position(|n| *n == &record[0])
                .ok_or_else(|| format!("unknown feature name {:?}", &record[0]))?;
            let value: f64 = record[1]
                .parse()
                .map_err(|e| format!("{:?}: {e}", &record[1]))?;
            if raw[slot].replace(value).is_some() {
                return Err(format!("feature {:?} listed twice", &record[0]));
            }
        }
        let mut values = [0.0; FEATURE_COUNT];
        for (i, v) in raw.iter().enumerate() {
            values[i] = v.ok_or_else(|| format!("missing feature {:?}", FEATURE_NAMES[i]))?;
        }
        WeightVector::new(values).map_err(|e| e.to_string())
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        WeightVector::from_csv(&text).map_err(|m| Error::parse(path, m))
    }

    pub fn save(&self, path: impl AsRef<FsPath>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Axis standard deviations of a Gaussian zone in the person frame
/// (+x along the person's heading).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianZone {
    pub sigma_x: f64,
    pub sigma_y: f64,
}

impl GaussianZone {
    fn eval(&self, local: Point) -> f64 {
        let ex = local.x * local.x / (2.0 * self.sigma_x * self.sigma_x);
        let ey = local.y * local.y / (2.0 * self.sigma_y * self.sigma_y);
        (-(ex + ey)).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureParams {
    /// Active for local x >= 0.
    pub front: GaussianZone,
    /// Active for local x <= 0.
    pub back: GaussianZone,
    pub sides: GaussianZone,
    pub obstacle_sigma: f64,
    /// Goal distance normalizer (the window diagonal).
    pub max_goal_distance: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            front: GaussianZone {
                sigma_x: 1.2,
                sigma_y: 0.6,
            },
            back: GaussianZone {
                sigma_x: 0.8,
                sigma_y: 0.6,
            },
            sides: GaussianZone {
                sigma_x: 0.6,
                sigma_y: 1.0,
            },
            obstacle_sigma: 0.4,
            max_goal_distance: WINDOW_SIZE * std::f64::consts::SQRT_2,
        }
    }
}

/// Feature values at a world point. People combine by max.
pub fn feature_vector(p: Point, scenario: &Scenario, params: &FeatureParams) -> FeatureVector {
    let goal = (p.distance(scenario.goal_point()) / params.max_goal_distance).min(1.0);

    let clearance = scenario.obstacle_distance(p);
    let obstacle = if clearance.is_finite() {
        let s = params.obstacle_sigma;
        (-(clearance * clearance) / (2.0 * s * s)).exp()
    } else {
        0.0
    };

    let mut front: f64 = 0.0;
    let mut back: f64 = 0.0;
    let mut sides: f64 = 0.0;
    for person in &scenario.people {
        let local = person.pose.to_local(p);
        if local.x >= 0.0 {
            front = front.max(params.front.eval(local));
        }
        if local.x <= 0.0 {
            back = back.max(params.back.eval(local));
        }
        sides = sides.max(params.sides.eval(local));
    }

    FeatureVector([goal, obstacle, front, back, sides].map(|v| v.clamp(0.0, 1.0)))
}

/// `1 + w·f(p)`: always in [1, 2].
pub fn linear_cost(
    p: Point,
    scenario: &Scenario,
    weights: &WeightVector,
    params: &FeatureParams,
) -> f64 {
    1.0 + feature_vector(p, scenario, params).dot(weights)
}

/// Trapezoidal path integral of the features over the path resampled at
/// [`RESAMPLE_STEP`]. Crossings of a person's lateral axis, where the front
/// and back zones switch on and off, are added as extra knots.
pub fn feature_count(path: &Path, scenario: &Scenario, params: &FeatureParams) -> FeatureVector {
    let f = |p| feature_vector(p, scenario, params);
    integrate_polyline(path, RESAMPLE_STEP, f, |a, b, out| {
        proxemics_breaks(a, b, scenario, out)
    })
}

/// Trapezoidal integral of an arbitrary per-point vector field.
pub fn feature_count_with(
    path: &Path,
    step: f64,
    f: impl Fn(Point) -> FeatureVector,
) -> FeatureVector {
    integrate_polyline(path, step, f, |_, _, _| {})
}

fn integrate_polyline(
    path: &Path,
    step: f64,
    f: impl Fn(Point) -> FeatureVector,
    breaks: impl Fn(Point, Point, &mut Vec<f64>),
) -> FeatureVector {
    let pts = path.points();
    let mut total = FeatureVector::ZERO;
    let mut knots = Vec::new();
    let mut prev = f(pts[0]);
    for w in pts.windows(2) {
        let next = f(w[1]);
        knots.clear();
        breaks(w[0], w[1], &mut knots);
        total += trapezoid(w[0], w[1], step, prev, next, &knots, &f);
        prev = next;
    }
    total
}

/// Segment parameters in (0, 1) where `a`-`b` crosses the line through a
/// person perpendicular to their heading. Appended to `out` in order.
pub(crate) fn proxemics_breaks(a: Point, b: Point, scenario: &Scenario, out: &mut Vec<f64>) {
    let start = out.len();
    for person in &scenario.people {
        let xa = person.pose.to_local(a).x;
        let xb = person.pose.to_local(b).x;
        if (xa < 0.0 && xb > 0.0) || (xa > 0.0 && xb < 0.0) {
            out.push(xa / (xa - xb));
        }
    }
    out[start..].sort_by(f64::total_cmp);
}

/// Trapezoid rule on `a`-`b` split into equal pieces of at most `step`, with
/// the sorted segment parameters in `breaks` added as knots. The integrand
/// may jump at a break; each side uses its own one-sided value.
pub(crate) fn trapezoid<T>(
    a: Point,
    b: Point,
    step: f64,
    fa: T,
    fb: T,
    breaks: &[f64],
    f: impl Fn(Point) -> T,
) -> T
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    let length = a.distance(b);
    let pieces = ((length / step) - 1e-9).ceil().max(1.0) as usize;
    // Parameter offset for one-sided values: a nanometre along the segment.
    let nudge = if length > 0.0 { 1e-9 / length } else { 0.0 };
    let mut sum = fa * 0.0;
    let mut left_t = 0.0;
    let mut left = fa;
    let mut pending = breaks.iter().copied().peekable();
    for k in 1..=pieces {
        let node_t = k as f64 / pieces as f64;
        while let Some(&t) = pending.peek() {
            if t >= node_t {
                break;
            }
            pending.next();
            if t <= left_t {
                continue;
            }
            let before = f(a.lerp(b, t - nudge));
            sum = sum + (left + before) * (0.5 * (t - left_t) * length);
            left_t = t;
            left = f(a.lerp(b, t + nudge));
        }
        let right = if k == pieces { fb } else { f(a.lerp(b, node_t)) };
        sum = sum + (left + right) * (0.5 * (node_t - left_t) * length);
        left_t = node_t;
        left = right;
    }
    sum
}
