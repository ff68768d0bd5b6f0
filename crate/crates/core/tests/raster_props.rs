mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use socnav::geometry::{point_segment_distance, Point, Pose2D};
use socnav::raster::{encode_input_raster, person_triangle, rasterize_path, RasterStyle};
use socnav::scenario::{Person, RectObstacle, Scenario};
use socnav::{GridSpec, Path};

/// Pixel centres closer than this to a shape boundary are not compared.
const AMBIGUOUS: f64 = 1e-6;

fn polygon_boundary_distance(p: Point, poly: &[Point]) -> f64 {
    (0..poly.len())
        .map(|i| point_segment_distance(p, poly[i], poly[(i + 1) % poly.len()]))
        .fold(f64::INFINITY, f64::min)
}

fn inside_convex(p: Point, poly: &[Point]) -> bool {
    let mut sign = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let c = (b - a).cross(p - a);
        if c != 0.0 {
            if sign != 0.0 && c.signum() != sign {
                return false;
            }
            sign = c.signum();
        }
    }
    true
}

/// Expected value of one pixel, or `None` when its centre sits on a boundary.
fn oracle_pixel(s: &Scenario, style: &RasterStyle, world: Point) -> Option<f32> {
    let mut v: f32 = 0.0;
    for person in &s.people {
        let d = world.distance(person.pose.position());
        if (d - person.body_radius).abs() < AMBIGUOUS {
            return None;
        }
        if d <= person.body_radius {
            v = v.max(style.person);
        }
        let tri = person_triangle(person.pose, style.heading_apex, person.body_radius);
        if polygon_boundary_distance(world, &tri) < AMBIGUOUS {
            return None;
        }
        if inside_convex(world, &tri) {
            v = v.max(style.person);
        }
    }
    let d = world.distance(s.goal_point());
    if (d - style.goal_radius).abs() < AMBIGUOUS {
        return None;
    }
    if d <= style.goal_radius {
        v = v.max(style.goal);
    }
    for rect in &s.rect_obstacles {
        if polygon_boundary_distance(world, &rect.corners()) < AMBIGUOUS {
            return None;
        }
        if rect.contains(world) {
            v = v.max(style.obstacle);
        }
    }
    Some(v)
}

fn rotate_quarter_turns(s: &Scenario, k: i32) -> Scenario {
    let angle = k as f64 * std::f64::consts::FRAC_PI_2;
    let c = s.robot.position();
    let rot = |p: Point| {
        let d = p - c;
        let r = match k.rem_euclid(4) {
            0 => d,
            1 => Point::new(-d.y, d.x),
            2 => Point::new(-d.x, -d.y),
            _ => Point::new(d.y, -d.x),
        };
        c + r
    };
    let pose = |p: Pose2D| {
        let q = rot(p.position());
        Pose2D::new(q.x, q.y, p.theta + angle)
    };
    let mut out = Scenario::new(pose(s.robot), pose(s.goal));
    for person in &s.people {
        out = out.with_person(Person { pose: pose(person.pose), ..*person });
    }
    for r in &s.rect_obstacles {
        let a = rot(Point::new(r.min_x, r.min_y));
        let b = rot(Point::new(r.max_x, r.max_y));
        out = out.with_rect(RectObstacle::new(a.x.min(b.x), a.y.min(b.y), a.x.max(b.x), a.y.max(b.y)));
    }
    out
}

fn eight_connected(set: &[(usize, usize)]) -> bool {
    let mut seen = vec![false; set.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..set.len() {
            let near = set[i].0.abs_diff(set[j].0) <= 1 && set[i].1.abs_diff(set[j].1) <= 1;
            if !seen[j] && near {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.iter().all(|&s| s)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn input_raster_matches_pixel_centre_oracle(seed in any::<u64>(), size in prop::sample::select(vec![32usize, 64, 100])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = common::random_scenario(&mut rng);
        let spec = GridSpec::window(size).unwrap();
        let style = RasterStyle::default();
        let grid = encode_input_raster(&s, &spec, &style).unwrap();
        for row in 0..size {
            for col in 0..size {
                let world = s.to_world(spec.pixel_center(col, row));
                if let Some(v) = oracle_pixel(&s, &style, world) {
                    prop_assert_eq!(grid.get(col, row), v, "pixel ({}, {})", col, row);
                }
            }
        }
    }

    #[test]
    fn quarter_turns_about_the_robot_leave_the_raster_unchanged(seed in any::<u64>(), k in 1i32..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = common::random_scenario(&mut rng);
        let spec = GridSpec::window(64).unwrap();
        let style = RasterStyle::default();
        let a = encode_input_raster(&s, &spec, &style).unwrap();
        let b = encode_input_raster(&rotate_quarter_turns(&s, k), &spec, &style).unwrap();
        prop_assert_eq!(a.values(), b.values());
    }

    #[test]
    fn path_rasters_are_binary_and_eight_connected(
        pts in prop::collection::vec((-4.9f64..4.9, -4.9f64..4.9), 1..8),
        size in prop::sample::select(vec![16usize, 64, 200]),
    ) {
        let path = Path::new(pts.iter().map(|&(x, y)| Point::new(x, y)).collect());
        prop_assume!(path.is_ok());
        let path = path.unwrap();
        let spec = GridSpec::window(size).unwrap();
        prop_assume!(path.points().iter().all(|&p| spec.locate(p).is_some()));
        let grid = rasterize_path(&path, &spec).unwrap();
        let mut set = Vec::new();
        for row in 0..size {
            for col in 0..size {
                let v = grid.get(col, row);
                prop_assert!(v == 0.0 || v == 1.0);
                if v == 1.0 {
                    set.push((col, row));
                }
            }
        }
        prop_assert!(!set.is_empty());
        prop_assert!(eight_connected(&set));
        for p in [path.start(), path.end()] {
            let (c, r) = spec.world_to_grid(p).unwrap();
            prop_assert_eq!(grid.get(c, r), 1.0);
        }
    }

    #[test]
    fn grid_world_round_trip_on_indices(size in 1usize..256, col in 0usize..256, row in 0usize..256) {
        let spec = GridSpec::window(size).unwrap();
        let (col, row) = (col % size, row % size);
        let p = spec.grid_to_world(col as i64, row as i64).unwrap();
        prop_assert_eq!(spec.world_to_grid(p).unwrap(), (col, row));
    }
}
