//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use socnav::fcn::{Activation, ConvSpec, LayerSpec, NetworkModel, Tensor};
use socnav::features::{feature_vector, FeatureParams, FEATURE_COUNT};
use socnav::geometry::{Point, Pose2D};
use socnav::scenario::{Person, RectObstacle, Scenario};
use socnav::Path;

/// Polyline distance by brute force: `b` sampled every `step` metres.
pub fn dense_point_path_distance(p: Point, b: &Path, step: f64) -> f64 {
    let pts = b.points();
    let mut best = p.distance(pts[0]);
    for w in pts.windows(2) {
        let len = w[0].distance(w[1]);
        let n = (len / step).ceil().max(1.0) as usize;
        for k in 0..=n {
            let t = k as f64 / n as f64;
            let q = Point::new(w[0].x + t * (w[1].x - w[0].x), w[0].y + t * (w[1].y - w[0].y));
            best = best.min(p.distance(q));
        }
    }
    best
}

/// Points of `a` split into equal pieces of at most `step` per segment.
pub fn resample_points(a: &Path, step: f64) -> Vec<Point> {
    let pts = a.points();
    let mut out = vec![pts[0]];
    for w in pts.windows(2) {
        let len = w[0].distance(w[1]);
        let n = ((len / step) - 1e-9).ceil().max(1.0) as usize;
        for k in 1..=n {
            let t = k as f64 / n as f64;
            out.push(Point::new(w[0].x + t * (w[1].x - w[0].x), w[0].y + t * (w[1].y - w[0].y)));
        }
    }
    out
}

pub fn dense_directed_distance(a: &Path, b: &Path) -> f64 {
    let pts = resample_points(a, 0.05);
    pts.iter().map(|&p| dense_point_path_distance(p, b, 0.001)).sum::<f64>() / pts.len() as f64
}

/// Midpoint-rule line integral of the features at `step` metres.
pub fn feature_line_integral(path: &Path, scenario: &Scenario, params: &FeatureParams, step: f64) -> [f64; FEATURE_COUNT] {
    let mut total = [0.0; FEATURE_COUNT];
    for w in path.points().windows(2) {
        let len = w[0].distance(w[1]);
        let n = (len / step).ceil().max(1.0) as usize;
        let ds = len / n as f64;
        for k in 0..n {
            let t = (k as f64 + 0.5) / n as f64;
            let p = Point::new(w[0].x + t * (w[1].x - w[0].x), w[0].y + t * (w[1].y - w[0].y));
            let f = feature_vector(p, scenario, params);
            for (acc, v) in total.iter_mut().zip(f.as_array()) {
                *acc += v * ds;
            }
        }
    }
    total
}

pub fn random_path(rng: &mut impl Rng, max_vertices: usize, half: f64) -> Path {
    let n = rng.gen_range(2..=max_vertices);
    let pts: Vec<Point> = (0..n)
        .map(|_| Point::new(rng.gen_range(-half..half), rng.gen_range(-half..half)))
        .collect();
    Path::from_points_dedup(pts).unwrap()
}

/// Robot at a random pose with people and rectangles around it.
pub fn random_scenario(rng: &mut impl Rng) -> Scenario {
    let robot = Pose2D::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
    let goal = robot.to_world(Point::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)));
    let mut s = Scenario::new(robot, Pose2D::new(goal.x, goal.y, 0.0));
    for _ in 0..rng.gen_range(0..4) {
        let c = robot.to_world(Point::new(rng.gen_range(-4.5..4.5), rng.gen_range(-4.5..4.5)));
        s = s.with_person(Person::new(Pose2D::new(c.x, c.y, rng.gen_range(-3.0..3.0))));
    }
    for _ in 0..rng.gen_range(0..3) {
        let c = robot.to_world(Point::new(rng.gen_range(-4.5..4.5), rng.gen_range(-4.5..4.5)));
        let (w, h) = (rng.gen_range(0.2..1.5), rng.gen_range(0.2..1.5));
        s = s.with_rect(RectObstacle::new(c.x - w / 2.0, c.y - h / 2.0, c.x + w / 2.0, c.y + h / 2.0));
    }
    s
}

/// `|a - n| / max(|a|, |n|)`, with both below `floor` counted as agreement.
pub fn relative_error(a: f64, n: f64, floor: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    if scale < floor {
        0.0
    } else {
        (a - n).abs() / scale
    }
}

/// Smallest count the discretisation resolves: a unit feature over one
/// resample step. Smaller components are compared against this.
pub const COUNT_FLOOR: f64 = socnav::path::RESAMPLE_STEP;

pub fn count_relative_error(fast: f64, exact: f64) -> f64 {
    (fast - exact).abs() / exact.abs().max(COUNT_FLOOR)
}

pub const FD_EPS: f64 = 1e-5;
/// Gradients smaller than this are compared absolutely (they sit at the
/// level of central-difference rounding noise).
pub const FD_FLOOR: f64 = 1e-9;

/// Central-difference gradient of the MSE for the flat parameter indices
/// given, alongside the analytic gradient. Returns `(index, analytic, numeric)`.
pub fn gradient_check(model: &NetworkModel, input: &Tensor, label: &Tensor, indices: &[usize]) -> Vec<(usize, f64, f64)> {
    let (_, grads) = model.loss_and_gradient(input, label).unwrap();
    let analytic = grads.flat();
    let base = model.flat_params();
    let mut probe = model.clone();
    indices
        .iter()
        .map(|&i| {
            let mut p = base.clone();
            p[i] = base[i] + FD_EPS;
            probe.set_flat_params(&p).unwrap();
            let up = probe.loss(input, label).unwrap();
            p[i] = base[i] - FD_EPS;
            probe.set_flat_params(&p).unwrap();
            let down = probe.loss(input, label).unwrap();
            (i, analytic[i], (up - down) / (2.0 * FD_EPS))
        })
        .collect()
}

/// Every parameter (biases included) drawn uniformly from `±scale`, so no
/// ReLU sits exactly at its kink.
pub fn randomize(model: &mut NetworkModel, rng: &mut impl Rng, scale: f64) {
    let p: Vec<f64> = (0..model.param_count()).map(|_| rng.gen_range(-scale..scale)).collect();
    model.set_flat_params(&p).unwrap();
}

pub fn random_tensor(rng: &mut impl Rng, c: usize, h: usize, w: usize) -> Tensor {
    Tensor::from_vec(c, h, w, (0..c * h * w).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()
}

fn conv(cin: usize, cout: usize, kernel: usize, stride: usize, activation: Activation) -> LayerSpec {
    LayerSpec::Conv(ConvSpec { in_channels: cin, out_channels: cout, kernel, stride, padding: kernel / 2, activation })
}

/// Small networks that each exercise one layer kind ahead of the 1×1
/// sigmoid head, plus a narrow copy of the full two-branch graph.
pub fn layer_probe_networks(size: usize) -> Vec<(&'static str, NetworkModel)> {
    use Activation::*;
    let probes = vec![
        ("conv", vec![conv(1, 3, 3, 1, Relu), conv(3, 1, 1, 1, Sigmoid)]),
        ("identity-conv", vec![conv(1, 2, 5, 1, Identity), conv(2, 1, 1, 1, Sigmoid)]),
        ("downsample-conv", vec![conv(1, 3, 3, 2, Relu), LayerSpec::Upsample { factor: 2 }, conv(3, 1, 1, 1, Sigmoid)]),
        ("pointwise-conv", vec![conv(1, 2, 1, 1, Relu), conv(2, 1, 1, 1, Sigmoid)]),
        ("upsample", vec![conv(1, 2, 3, 4, Identity), LayerSpec::Upsample { factor: 4 }, conv(2, 1, 1, 1, Sigmoid)]),
        ("concat", vec![conv(1, 2, 3, 1, Relu), LayerSpec::ConcatInput, conv(3, 1, 1, 1, Sigmoid)]),
        ("two-branch", socnav::fcn::two_branch_layers([3, 4, 3], 3)),
    ];
    probes
        .into_iter()
        .map(|(name, layers)| (name, NetworkModel::new((1, size, size), layers).unwrap()))
        .collect()
}
