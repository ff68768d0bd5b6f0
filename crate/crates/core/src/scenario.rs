//! World-frame scenario description: robot, goal, static people and obstacles.
//!
//! The local planning window is a square of [`WINDOW_SIZE`] meters centred on the
//! robot and aligned with its heading. Everything that rasterizes or samples the
//! window works in that robot-local frame.

use std::fs;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    point_segment_distance, segment_segment_distance, segments_intersect, Point, Pose2D,
};

/// Side length of the local window in meters.
pub const WINDOW_SIZE: f64 = 10.0;
pub const WINDOW_HALF: f64 = WINDOW_SIZE / 2.0;
pub const DEFAULT_BODY_RADIUS: f64 = 0.25;

fn default_body_radius() -> f64 {
    DEFAULT_BODY_RADIUS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Person {
    pub pose: Pose2D,
    #[serde(default = "default_body_radius")]
    pub body_radius: f64,
}

impl Person {
    pub fn new(pose: Pose2D) -> Self {
        Person {
            pose,
            body_radius: DEFAULT_BODY_RADIUS,
        }
    }
}

/// Axis-aligned (world frame) rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectObstacle {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl RectObstacle {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        RectObstacle {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    /// Corners in counter-clockwise order.
    pub fn corners(&self) -> [Point; 4] {
        [
            Point::new(self.min_x, self.min_y),
            Point::new(self.max_x, self.min_y),
            Point::new(self.max_x, self.max_y),
            Point::new(self.min_x, self.max_y),
        ]
    }

    pub fn distance(&self, p: Point) -> f64 {
        let dx = (self.min_x - p.x).max(0.0).max(p.x - self.max_x);
        let dy = (self.min_y - p.y).max(0.0).max(p.y - self.max_y);
        dx.hypot(dy)
    }

    pub fn intersects_segment(&self, a: Point, b: Point) -> bool {
        if self.contains(a) || self.contains(b) {
            return true;
        }
        let c = self.corners();
        (0..4).any(|i| segments_intersect(a, b, c[i], c[(i + 1) % 4]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentObstacle {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl SegmentObstacle {
    pub fn new(a: Point, b: Point) -> Self {
        SegmentObstacle {
            x1: a.x,
            y1: a.y,
            x2: b.x,
            y2: b.y,
        }
    }

    pub fn start(&self) -> Point {
        Point::new(self.x1, self.y1)
    }

    pub fn end(&self) -> Point {
        Point::new(self.x2, self.y2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub robot: Pose2D,
    pub goal: Pose2D,
    #[serde(default)]
    pub people: Vec<Person>,
    #[serde(default)]
    pub rect_obstacles: Vec<RectObstacle>,
    #[serde(default)]
    pub segment_obstacles: Vec<SegmentObstacle>,
}

impl Scenario {
    pub fn new(robot: Pose2D, goal: Pose2D) -> Self {
        Scenario {
            robot,
            goal,
            people: Vec::new(),
            rect_obstacles: Vec::new(),
            segment_obstacles: Vec::new(),
        }
    }

    pub fn with_person(mut self, person: Person) -> Self {
        self.people.push(person);
        self
    }

    pub fn with_rect(mut self, rect: RectObstacle) -> Self {
        self.rect_obstacles.push(rect);
        self
    }

    pub fn with_segment(mut self, segment: SegmentObstacle) -> Self {
        self.segment_obstacles.push(segment);
        self
    }

    pub fn start(&self) -> Point {
        self.robot.position()
    }

    pub fn goal_point(&self) -> Point {
        self.goal.position()
    }

    pub fn to_local(&self, p: Point) -> Point {
        self.robot.to_local(p)
    }

    pub fn to_world(&self, p: Point) -> Point {
        self.robot.to_world(p)
    }

    pub fn in_window(&self, p: Point) -> bool {
        let l = self.to_local(p);
        l.x.abs() <= WINDOW_HALF && l.y.abs() <= WINDOW_HALF
    }

    pub fn has_obstacles(&self) -> bool {
        !self.rect_obstacles.is_empty() || !self.segment_obstacles.is_empty()
    }

    pub fn point_in_collision(&self, p: Point) -> bool {
        self.rect_obstacles.iter().any(|r| r.contains(p))
            || self
                .segment_obstacles
                .iter()
                .any(|s| point_segment_distance(p, s.start(), s.end()) == 0.0)
    }

    pub fn segment_in_collision(&self, a: Point, b: Point) -> bool {
        self.rect_obstacles
            .iter()
            .any(|r| r.intersects_segment(a, b))
            || self
                .segment_obstacles
                .iter()
                .any(|s| segments_intersect(a, b, s.start(), s.end()))
    }

    /// Distance to the closest obstacle surface (0 inside a rectangle,
    /// infinite when there are no obstacles).
    pub fn obstacle_distance(&self, p: Point) -> f64 {
        let rects = self.rect_obstacles.iter().map(|r| r.distance(p));
        let segs = self
            .segment_obstacles
            .iter()
            .map(|s| point_segment_distance(p, s.start(), s.end()));
        rects.chain(segs).fold(f64::INFINITY, f64::min)
    }

    /// Clearance of a whole segment from the obstacles.
    pub fn segment_clearance(&self, a: Point, b: Point) -> f64 {
        let rects = self.rect_obstacles.iter().map(|r| {
            if r.intersects_segment(a, b) {
                return 0.0;
            }
            let c = r.corners();
            (0..4)
                .map(|i| segment_segment_distance(a, b, c[i], c[(i + 1) % 4]))
                .fold(f64::INFINITY, f64::min)
        });
        let segs = self
            .segment_obstacles
            .iter()
            .map(|s| segment_segment_distance(a, b, s.start(), s.end()));
        rects.chain(segs).fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, pose) in [("robot", &self.robot), ("goal", &self.goal)] {
            if !(pose.x.is_finite() && pose.y.is_finite() && pose.theta.is_finite()) {
                return Err(Error::InvalidScenario(format!("{name} pose is not finite")));
            }
        }
        for (i, r) in self.rect_obstacles.iter().enumerate() {
            if !(r.min_x < r.max_x && r.min_y < r.max_y) {
                return Err(Error::InvalidScenario(format!("rectangle {i} is empty")));
            }
        }
        for (i, p) in self.people.iter().enumerate() {
            if !(p.body_radius > 0.0) {
                return Err(Error::InvalidScenario(format!(
                    "person {i} has non-positive body radius"
                )));
            }
        }
        if !self.in_window(self.goal_point()) {
            return Err(Error::InvalidScenario(format!(
                "goal lies outside the {WINDOW_SIZE} m local window"
            )));
        }
        if self.point_in_collision(self.start()) {
            return Err(Error::InvalidScenario("robot is inside an obstacle".into()));
        }
        if self.point_in_collision(self.goal_point()) {
            return Err(Error::InvalidScenario("goal is inside an obstacle".into()));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let scenario: Scenario =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        // Normalize headings coming from hand-written files.
        Ok(Scenario {
            robot: Pose2D::new(scenario.robot.x, scenario.robot.y, scenario.robot.theta),
            goal: Pose2D::new(scenario.goal.x, scenario.goal.y, scenario.goal.theta),
            ..scenario
        })
    }

    pub fn save(&self, path: impl AsRef<FsPath>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("scenario serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Scenario {
        Scenario::new(Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(3.0, 0.0, 0.0))
    }

    #[test]
    fn goal_outside_window_is_rejected() {
        let s = Scenario::new(Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(6.0, 0.0, 0.0));
        assert!(matches!(s.validate(), Err(Error::InvalidScenario(_))));
        // The window turns with the robot heading.
        let s = Scenario::new(Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(4.8, -4.8, 0.0));
        assert!(s.validate().is_ok());
        let s = Scenario::new(
            Pose2D::new(0.0, 0.0, std::f64::consts::FRAC_PI_4),
            Pose2D::new(4.8, -4.8, 0.0),
        );
        assert!(s.validate().is_err());
    }

    #[test]
    fn robot_in_obstacle_is_rejected() {
        let s = base().with_rect(RectObstacle::new(-0.5, -0.5, 0.5, 0.5));
        assert!(s.validate().is_err());
        let s = base().with_rect(RectObstacle::new(1.0, -0.5, 1.5, 0.5));
        assert!(s.validate().is_ok());
        assert!(s.segment_in_collision(s.start(), s.goal_point()));
        assert!(!s.segment_in_collision(s.start(), Point::new(0.9, 0.0)));
        assert_eq!(s.obstacle_distance(Point::new(0.0, 0.0)), 1.0);
    }

    #[test]
    fn json_round_trip_uses_documented_keys() {
        let s = base()
            .with_person(Person::new(Pose2D::new(1.0, 1.0, 0.5)))
            .with_segment(SegmentObstacle::new(
                Point::new(-1.0, 2.0),
                Point::new(1.0, 2.0),
            ));
        let text = serde_json::to_string(&s).unwrap();
        for key in [
            "robot",
            "goal",
            "people",
            "rect_obstacles",
            "segment_obstacles",
            "body_radius",
        ] {
            assert!(text.contains(key), "{key} missing from {text}");
        }
        let back: Scenario = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn body_radius_defaults_when_omitted() {
        let text = r#"{"robot":{"x":0,"y":0,"theta":0},"goal":{"x":2,"y":0},
                       "people":[{"pose":{"x":1,"y":1,"theta":3.0}}]}"#;
        let s: Scenario = serde_json::from_str(text).unwrap();
        assert_eq!(s.people[0].body_radius, DEFAULT_BODY_RADIUS);
        assert!(s.rect_obstacles.is_empty());
    }
}
