use std::collections::HashMap;

use socnav::geometry::{point_polyline_distance, Point, Pose2D};
use socnav::planner::Planner;
use socnav::raster::rasterize_path;
use socnav::scenario::{Person, RectObstacle, Scenario};
use socnav::{plan, CostProvider, GridSpec, Path, PlannerParams, WeightVector};

fn cluttered() -> Scenario {
    Scenario::new(Pose2D::new(1.0, -1.0, 0.4), Pose2D::new(4.0, 1.5, 0.0))
        .with_person(Person::new(Pose2D::new(2.5, 0.2, 2.0)))
        .with_person(Person::new(Pose2D::new(3.5, 0.0, -1.0)))
        .with_rect(RectObstacle::new(2.0, -0.6, 2.4, 0.0))
        .with_rect(RectObstacle::new(3.0, 1.0, 3.3, 1.2))
}

/// Robot at the origin facing +x, a wall at x = 1.5 with a 1 m gap centred on y = 2.
fn wall_with_gap() -> Scenario {
    Scenario::new(Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(3.5, 0.0, 0.0))
        .with_rect(RectObstacle::new(1.4, -5.0, 1.6, 1.5))
        .with_rect(RectObstacle::new(1.4, 2.5, 1.6, 5.0))
}

#[test]
fn stored_costs_match_recomputed_edges_after_every_iteration() {
    let s = cluttered();
    let provider = CostProvider::linear(WeightVector::new([0.3, 0.3, 0.2, 0.1, 0.1]).unwrap());
    let params = PlannerParams { max_iterations: 1500, rng_seed: 9, ..Default::default() };
    let mut planner = Planner::new(&s, &provider, None, params).unwrap();
    let mut edge_memo: HashMap<(usize, usize), f64> = HashMap::new();
    let mut last_best = f64::INFINITY;
    for _ in 0..params.max_iterations {
        let before: Vec<f64> = planner.nodes().iter().map(|n| n.cost_to_come).collect();
        planner.step();
        let nodes = planner.nodes();
        for (i, old) in before.iter().enumerate() {
            assert!(nodes[i].cost_to_come <= old + 1e-12, "node {i} got more expensive");
        }
        for (i, n) in nodes.iter().enumerate() {
            let mut total = 0.0;
            let mut child = i;
            while let Some(p) = nodes[child].parent {
                total += *edge_memo
                    .entry((p, child))
                    .or_insert_with(|| provider.edge_cost(&s, nodes[p].state, nodes[child].state));
                child = p;
            }
            assert!((n.cost_to_come - total).abs() <= 1e-9, "node {i}: {} vs {total}", n.cost_to_come);
        }
        let best = planner.best_cost();
        assert!(best <= last_best);
        last_best = best;
    }
    assert!(last_best.is_finite());
}

#[test]
fn best_cost_never_rises_across_checkpoints() {
    let s = cluttered();
    let provider = CostProvider::Uniform;
    for seed in 0..3 {
        let params = PlannerParams { max_iterations: 5000, rng_seed: seed, ..Default::default() };
        let mut planner = Planner::new(&s, &provider, None, params).unwrap();
        let mut costs = Vec::new();
        for _ in 0..10 {
            for _ in 0..500 {
                planner.step();
            }
            costs.push(planner.best_cost());
        }
        assert!(costs.windows(2).all(|w| w[1] <= w[0]), "{costs:?}");
        assert!(costs[9].is_finite());
    }
}

#[test]
fn returned_paths_survive_a_fine_collision_recheck() {
    let s = cluttered();
    for (seed, provider) in [CostProvider::Uniform, CostProvider::linear(WeightVector::uniform())].iter().enumerate() {
        for k in 0..3 {
            let params = PlannerParams { max_iterations: 3000, rng_seed: 10 * seed as u64 + k, ..Default::default() };
            let path = plan(&s, provider, None, &params).unwrap().into_path().unwrap();
            assert_eq!(path.start(), s.start());
            assert_eq!(path.end(), s.goal_point());
            for p in path.resampled(0.01).points() {
                assert!(!s.point_in_collision(*p), "{p:?} collides");
            }
        }
    }
}

#[test]
fn prediction_through_a_gap_concentrates_the_tree() {
    let s = wall_with_gap();
    let route = Path::new(vec![Point::new(0.0, 0.0), Point::new(1.5, 2.0), Point::new(3.5, 0.0)]).unwrap();
    let spec = GridSpec::window(64).unwrap();
    let prediction = rasterize_path(&route, &spec).unwrap();
    let support: Vec<Point> = (0..spec.height)
        .flat_map(|r| (0..spec.width).map(move |c| (c, r)))
        .filter(|&(c, r)| f64::from(prediction.get(c, r)) > PlannerParams::default().bias_threshold)
        .map(|(c, r)| spec.pixel_center(c, r))
        .collect();
    let provider = CostProvider::prediction(prediction.clone());
    let mut fractions = Vec::new();
    for seed in 0..10 {
        let params = PlannerParams { rng_seed: seed, ..Default::default() };
        let mut planner = Planner::new(&s, &provider, Some(&prediction), params).unwrap();
        planner.run();
        let near = planner
            .nodes()
            .iter()
            .filter(|n| support.iter().any(|q| q.distance(s.to_local(n.state)) <= 1.0))
            .count();
        fractions.push(near as f64 / planner.nodes().len() as f64);
        let path = planner.best_path().expect("a path through the gap");
        let crossing = path
            .resampled(0.01)
            .points()
            .iter()
            .find(|p| (p.x - 1.5).abs() < 0.01)
            .copied()
            .unwrap();
        assert!((1.5..=2.5).contains(&crossing.y), "crossed the wall at {crossing:?}");
        assert!(point_polyline_distance(path.end(), route.points()) < 1e-9);
    }
    let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
    assert!(mean >= 0.6, "{fractions:?}");
}
