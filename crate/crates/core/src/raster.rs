//! Scenario and path rasterization into robot-centred, heading-aligned grids.
//!
//! Shapes are filled by scanline: a pixel is set when its centre lies inside
//! the (closed) shape. Polylines use a supercover traversal, so every pixel the
//! line passes through is set and the result is 8-connected.

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::grid::{FloatGrid, GridSpec};
use crate::path::Path;
use crate::scenario::Scenario;

pub const OBSTACLE_INTENSITY: f32 = 1.0;
pub const GOAL_INTENSITY: f32 = 0.8;
pub const PERSON_INTENSITY: f32 = 0.6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterStyle {
    pub obstacle: f32,
    pub goal: f32,
    pub person: f32,
    pub goal_radius: f64,
    /// Distance of the orientation triangle's apex ahead of the person centre.
    pub heading_apex: f64,
    /// Half width of the triangle base; `None` uses the body radius.
    pub heading_half_base: Option<f64>,
}

impl Default for RasterStyle {
    fn default() -> Self {
        RasterStyle {
            obstacle: OBSTACLE_INTENSITY,
            goal: GOAL_INTENSITY,
            person: PERSON_INTENSITY,
            goal_radius: 0.15,
            heading_apex: 0.5,
            heading_half_base: None,
        }
    }
}

/// Renders the network input for `scenario`. Overlaps keep the brightest value.
pub fn encode_input_raster(
    scenario: &Scenario,
    spec: &GridSpec,
    style: &RasterStyle,
) -> Result<FloatGrid> {
    let goal_local = scenario.to_local(scenario.goal_point());
    if spec.locate(goal_local).is_none() {
        return Err(Error::InvalidScenario(format!(
            "goal at local ({:.3}, {:.3}) is outside the grid window",
            goal_local.x, goal_local.y
        )));
    }
    let mut grid = FloatGrid::zeros(*spec);
    let to_px = |p: Point| {
        let (x, y) = spec.continuous(scenario.to_local(p));
        Point::new(x, y)
    };

    for person in &scenario.people {
        let centre = to_px(person.pose.position());
        fill_circle(
            &mut grid,
            centre,
            person.body_radius / spec.resolution,
            style.person,
        );
        let half_base = style.heading_half_base.unwrap_or(person.body_radius);
        let tri = person_triangle(person.pose, style.heading_apex, half_base).map(to_px);
        fill_convex_polygon(&mut grid, &tri, style.person);
    }

    fill_circle(
        &mut grid,
        to_px(scenario.goal_point()),
        style.goal_radius / spec.resolution,
        style.goal,
    );

    for rect in &scenario.rect_obstacles {
        let corners = rect.corners().map(to_px);
        fill_convex_polygon(&mut grid, &corners, style.obstacle);
    }
    for seg in &scenario.segment_obstacles {
        let a = to_px(seg.start());
        let b = to_px(seg.end());
        supercover(a, b, |c, r| paint(&mut grid, c, r, style.obstacle));
    }
    Ok(grid)
}

/// World-frame vertices of the isosceles heading glyph: apex ahead of the
/// centre, base through the centre perpendicular to the heading.
pub fn person_triangle(pose: crate::geometry::Pose2D, apex: f64, half_base: f64) -> [Point; 3] {
    [
        pose.to_world(Point::new(apex, 0.0)),
        pose.to_world(Point::new(0.0, half_base)),
        pose.to_world(Point::new(0.0, -half_base)),
    ]
}

/// Binary label for a path already expressed in the grid's frame.
pub fn rasterize_path(path: &Path, spec: &GridSpec) -> Result<FloatGrid> {
    let mut grid = FloatGrid::zeros(*spec);
    for &p in path.points() {
        spec.world_to_grid(p)?;
    }
    let px: Vec<Point> = path
        .points()
        .iter()
        .map(|&p| {
            let (x, y) = spec.continuous(p);
            Point::new(x, y)
        })
        .collect();
    if px.len() == 1 {
        supercover(px[0], px[0], |c, r| paint(&mut grid, c, r, 1.0));
    }
    for w in px.windows(2) {
        supercover(w[0], w[1], |c, r| paint(&mut grid, c, r, 1.0));
    }
    Ok(grid)
}

/// Label for a world-frame path, expressed in the scenario's robot frame.
pub fn rasterize_world_path(
    path: &Path,
    scenario: &Scenario,
    spec: &GridSpec,
) -> Result<FloatGrid> {
    let local = Path::new(
        path.points()
            .iter()
            .map(|&p| scenario.to_local(p))
            .collect(),
    )?;
    rasterize_path(&local, spec)
}

fn paint(grid: &mut FloatGrid, col: i64, row: i64, v: f32) {
    if col >= 0 && row >= 0 && (col as usize) < grid.width() && (row as usize) < grid.height() {
        grid.paint_max(col as usize, row as usize, v);
    }
}

/// Draws a world-frame segment into a grid in the scenario's robot frame.
/// Pixels outside the grid are skipped; overlaps keep the brighter value.
pub fn paint_world_segment(grid: &mut FloatGrid, scenario: &Scenario, a: Point, b: Point, v: f32) {
    let spec = *grid.spec();
    let px = |p: Point| {
        let (x, y) = spec.continuous(scenario.to_local(p));
        Point::new(x, y)
    };
    supercover(px(a), px(b), |c, r| paint(grid, c, r, v));
}

/// Which layers a plan overlay shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverlayLayers {
    pub scene: bool,
    pub tree: bool,
    pub path: bool,
}

impl Default for OverlayLayers {
    fn default() -> Self {
        OverlayLayers {
            scene: true,
            tree: true,
            path: true,
        }
    }
}

pub const OVERLAY_SCENE_SCALE: f32 = 0.4;
pub const OVERLAY_TREE: f32 = 0.6;
pub const OVERLAY_PATH: f32 = 1.0;

/// Planner picture: dimmed input raster, tree edges in gray, path in white.
pub fn render_overlay(
    scenario: &Scenario,
    spec: &GridSpec,
    tree: &[(Point, Point)],
    path: Option<&Path>,
    layers: OverlayLayers,
) -> Result<FloatGrid> {
    let mut grid = FloatGrid::zeros(*spec);
    if layers.scene {
        let scene = encode_input_raster(scenario, spec, &RasterStyle::default())?;
        for (o, v) in grid.values_mut().iter_mut().zip(scene.values()) {
            *o = v * OVERLAY_SCENE_SCALE;
        }
    }
    if layers.tree {
        for &(a, b) in tree {
            paint_world_segment(&mut grid, scenario, a, b, OVERLAY_TREE);
        }
    }
    if let (true, Some(path)) = (layers.path, path) {
        let pts = path.points();
        paint_world_segment(&mut grid, scenario, pts[0], pts[0], OVERLAY_PATH);
        for w in pts.windows(2) {
            paint_world_segment(&mut grid, scenario, w[0], w[1], OVERLAY_PATH);
        }
    }
    Ok(grid)
}

/// Slack in pixels so boundaries that land on a pixel centre up to rounding
/// (e.g. 0.15 m / 0.05 m) still count as inside.
const EDGE_SLACK: f64 = 1e-9;

fn row_range(grid: &FloatGrid, lo: f64, hi: f64) -> std::ops::RangeInclusive<i64> {
    let (lo, hi) = (lo - EDGE_SLACK, hi + EDGE_SLACK);
    let lo = lo.ceil().max(0.0) as i64;
    let hi = hi.floor().min(grid.height() as f64 - 1.0) as i64;
    lo..=hi
}

fn fill_span(grid: &mut FloatGrid, row: i64, x0: f64, x1: f64, v: f32) {
    let c0 = (x0 - EDGE_SLACK).ceil().max(0.0) as i64;
    let c1 = (x1 + EDGE_SLACK).floor().min(grid.width() as f64 - 1.0) as i64;
    for c in c0..=c1 {
        paint(grid, c, row, v);
    }
}

/// Circle in continuous pixel coordinates.
fn fill_circle(grid: &mut FloatGrid, centre: Point, radius: f64, v: f32) {
    for row in row_range(grid, centre.y - radius, centre.y + radius) {
        let dy = row as f64 - centre.y;
        let h = radius * radius - dy * dy;
        if h < -2.0 * radius * EDGE_SLACK {
            continue;
        }
        let h = h.max(0.0);
        let dx = h.sqrt();
        fill_span(grid, row, centre.x - dx, centre.x + dx, v);
    }
}

/// Convex polygon in continuous pixel coordinates.
fn fill_convex_polygon(grid: &mut FloatGrid, poly: &[Point], v: f32) {
    let min_y = poly.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let max_y = poly.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    for row in row_range(grid, min_y, max_y) {
        let y = row as f64;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..poly.len() {
            let a = poly[i];
            let b = poly[(i + 1) % poly.len()];
            if (y < a.y.min(b.y) - EDGE_SLACK) || (y > a.y.max(b.y) + EDGE_SLACK) {
                continue;
            }
            if a.y == b.y {
                lo = lo.min(a.x.min(b.x));
                hi = hi.max(a.x.max(b.x));
            } else {
                let t = ((y - a.y) / (b.y - a.y)).clamp(0.0, 1.0);
                let x = a.x + t * (b.x - a.x);
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        if lo <= hi {
            fill_span(grid, row, lo, hi, v);
        }
    }
}

/// Visits every pixel cell crossed by the segment `a`-`b` (continuous pixel
/// coordinates, cell `(c, r)` spans `[c-0.5, c+0.5] x [r-0.5, r+0.5]`). An exact
/// corner crossing steps diagonally.
pub fn supercover(a: Point, b: Point, mut visit: impl FnMut(i64, i64)) {
    let mut c = a.x.round() as i64;
    let mut r = a.y.round() as i64;
    let end_c = b.x.round() as i64;
    let end_r = b.y.round() as i64;
    visit(c, r);
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let step_c = dx.signum() as i64 * i64::from(dx != 0.0);
    let step_r = dy.signum() as i64 * i64::from(dy != 0.0);
    let boundary = |cell: i64, start: f64, d: f64| {
        if d > 0.0 {
            (cell as f64 + 0.5 - start) / d
        } else if d < 0.0 {
            (cell as f64 - 0.5 - start) / d
        } else {
            f64::INFINITY
        }
    };
    let mut t_max_x = boundary(c, a.x, dx);
    let mut t_max_y = boundary(r, a.y, dy);
    let t_delta_x = if dx != 0.0 {
        1.0 / dx.abs()
    } else {
        f64::INFINITY
    };
    let t_delta_y = if dy != 0.0 {
        1.0 / dy.abs()
    } else {
        f64::INFINITY
    };
    let max_steps = (end_c - c).abs() + (end_r - r).abs();
    for _ in 0..max_steps {
        if c == end_c && r == end_r {
            break;
        }
        if (t_max_x - t_max_y).abs() <= 1e-12 * t_max_x.abs().max(1.0) {
            c += step_c;
            r += step_r;
            t_max_x += t_delta_x;
            t_max_y += t_delta_y;
        } else if t_max_x < t_max_y {
            c += step_c;
            t_max_x += t_delta_x;
        } else {
            r += step_r;
            t_max_y += t_delta_y;
        }
        visit(c, r);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose2D;
    use crate::scenario::{Person, RectObstacle};
    use proptest::prelude::*;

    fn set_pixels(grid: &FloatGrid) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for r in 0..grid.height() {
            for c in 0..grid.width() {
                if grid.get(c, r) > 0.0 {
                    out.push((c, r));
                }
            }
        }
        out
    }

    #[test]
    fn goal_only_scenario() {
        let spec = GridSpec::full_scale();
        let s = Scenario::new(Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(3.0, 0.0, 0.0));
        let g = encode_input_raster(&s, &spec, &RasterStyle::default()).unwrap();
        let px = set_pixels(&g);
        // 0.15 m radius at 0.05 m/px: 3-pixel disc centred 60 px right of centre.
        let (cc, cr) = spec.center_pixel();
        assert!(px.iter().all(|&(c, r)| {
            let d2 = (c as i64 - (cc as i64 + 60)).pow(2) + (r as i64 - cr as i64).pow(2);
            d2 <= 9 && g.get(c, r) == GOAL_INTENSITY
        }));
        assert_eq!(px.len(), 29);
    }

    #[test]
    fn overlay_draws_path_over_tree() {
        let spec = GridSpec::window(64).unwrap();
        let s = Scenario::new(Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(3.0, 0.0, 0.0));
        let path = Path::new(vec![s.start(), s.goal_point()]).unwrap();
        let tree = [
            (s.start(), Point::new(0.0, 2.0)),
            (s.start(), s.goal_point()),
        ];
        let g = render_overlay(&s, &spec, &tree, Some(&path), OverlayLayers::default()).unwrap();
        let (cc, cr) = spec.center_pixel();
        assert_eq!(g.get(cc + 5, cr), OVERLAY_PATH);
        assert_eq!(g.get(cc, cr + 5), OVERLAY_TREE);
        assert_eq!(g.get(cc - 5, cr), 0.0);
        let bare = render_overlay(
            &s,
            &spec,
            &tree,
            Some(&path),
            OverlayLayers {
                tree: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(bare.get(cc, cr + 5), 0.0);
    }

    #[test]
    fn goal_outside_grid_errors() {
        let spec = GridSpec::full_scale();
        let s = Scenario::new(Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(0.0, 5.5, 0.0));
        assert!(encode_input_raster(&s, &spec, &RasterStyle::default()).is_err());
    }

    #[test]
    fn values_come_from_the_palette() {
        let spec = GridSpec::full_scale();
        let s = Scenario::new(Pose2D::new(1.0, 2.0, 0.4), Pose2D::new(3.0, 3.0, 0.0))
            .with_person(Person::new(Pose2D::new(2.0, 3.0, 2.0)))
            .with_person(Person::new(Pose2D::new(2.1, 3.1, -1.0)))
            .with_rect(RectObstacle::new(-1.0, 0.0, 0.0, 1.5));
        let g = encode_input_raster(&s, &spec, &RasterStyle::default()).unwrap();
        assert!(g.values().iter().all(|v| [0.0, 0.6, 0.8, 1.0].contains(v)));
        assert!(g.values().iter().any(|&v| v == 0.6));
        assert!(g.values().iter().any(|&v| v == 1.0));
    }

    #[test]
    fn single_point_path_sets_one_pixel() {
        let spec = GridSpec::full_scale();
        let g = rasterize_path(&Path::single(Point::new(0.0, 0.0)), &spec).unwrap();
        assert_eq!(set_pixels(&g), vec![spec.center_pixel()]);
    }

    #[test]
    fn straight_path_sets_one_row() {
        let spec = GridSpec::full_scale();
        let path = Path::new(vec![Point::new(0.0, 0.0), Point::new(3.0, 0.0)]).unwrap();
        let px = set_pixels(&rasterize_path(&path, &spec).unwrap());
        assert_eq!(px.len(), 61);
        assert!(px.iter().all(|&(_, r)| r == 100));
    }

    #[test]
    fn path_outside_grid_errors() {
        let spec = GridSpec::full_scale();
        let path = Path::new(vec![Point::new(0.0, 0.0), Point::new(7.0, 0.0)]).unwrap();
        assert!(rasterize_path(&path, &spec).is_err());
    }

    fn eight_connected(px: &[(usize, usize)]) -> bool {
        let set: std::collections::HashSet<_> = px.iter().copied().collect();
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![px[0]];
        while let Some((c, r)) = stack.pop() {
            if !seen.insert((c, r)) {
                continue;
            }
            for dc in -1i64..=1 {
                for dr in -1i64..=1 {
                    let n = ((c as i64 + dc) as usize, (r as i64 + dr) as usize);
                    if set.contains(&n) && !seen.contains(&n) {
                        stack.push(n);
                    }
                }
            }
        }
        seen.len() == set.len()
    }

    proptest! {
        #[test]
        fn path_rasters_are_binary_and_connected(
            pts in prop::collection::vec((-4.9f64..4.9, -4.9f64..4.9), 1..6)
        ) {
            let path = Path::from_points_dedup(pts.into_iter().map(|(x, y)| Point::new(x, y)).collect()).unwrap();
            let g = rasterize_path(&path, &GridSpec::window(64).unwrap()).unwrap();
            prop_assert!(g.values().iter().all(|&v| v == 0.0 || v == 1.0));
            let px = set_pixels(&g);
            prop_assert!(!px.is_empty());
            prop_assert!(eight_connected(&px));
        }
    }
}
