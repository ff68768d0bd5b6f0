use std::fs;
use std::path::Path as FsPath;

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Spacing used whenever paths are compared or integrated.
pub const RESAMPLE_STEP: f64 = 0.05;

/// Ordered polyline from start to goal. Never empty; consecutive points are
/// distinct unless the path is a single point.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    points: Vec<Point>,
}

impl Path {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("path has no points".into()));
        }
        if let Some(i) = points.windows(2).position(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!(
                "path has a zero-length segment at point {i}"
            )));
        }
        if points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(Error::InvalidArgument("path has a non-finite point".into()));
        }
        Ok(Path { points })
    }

    /// Builds a path after dropping consecutive duplicates.
    pub fn from_points_dedup(mut points: Vec<Point>) -> Result<Self> {
        points.dedup();
        Path::new(points)
    }

    pub fn single(p: Point) -> Self {
        Path { points: vec![p] }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn start(&self) -> Point {
        self.points[0]
    }

    pub fn end(&self) -> Point {
        *self.points.last().expect("non-empty")
    }

    pub fn length(&self) -> f64 {
        self.points
            .windows(2)
            .fold(0.0, |acc, w| acc + w[0].distance(w[1]))
    }

    pub fn reversed(&self) -> Path {
        let mut points = self.points.clone();
        points.reverse();
        Path { points }
    }

    pub fn translated(&self, t: Point) -> Path {
        Path {
            points: self.points.iter().map(|&p| p + t).collect(),
        }
    }

    /// Joins two paths; a shared junction point is kept once.
    pub fn concat(&self, other: &Path) -> Path {
        let mut points = self.points.clone();
        let skip = usize::from(other.start() == self.end());
        points.extend_from_slice(&other.points[skip..]);
        Path { points }
    }

    /// Splits every segment into equal pieces no longer than `step`, keeping the
    /// original vertices.
    pub fn resampled(&self, step: f64) -> Path {
        assert!(step > 0.0, "resample step must be positive");
        let mut points =
            Vec::with_capacity(self.points.len() + (self.length() / step) as usize + 1);
        points.push(self.points[0]);
        for w in self.points.windows(2) {
            let (a, b) = (w[0], w[1]);
            let pieces = ((a.distance(b) / step) - 1e-9).ceil().max(1.0) as usize;
            for k in 1..pieces {
                points.push(a.lerp(b, k as f64 / pieces as f64));
            }
            points.push(b);
        }
        Path { points }
    }

    /// Drops interior vertices that lie on the line through their neighbours.
    pub fn without_collinear(&self, tolerance: f64) -> Path {
        if self.points.len() < 3 {
            return self.clone();
        }
        let mut points = vec![self.points[0]];
        for i in 1..self.points.len() - 1 {
            let prev = *points.last().unwrap();
            let cur = self.points[i];
            let next = self.points[i + 1];
            let ab = cur - prev;
            let bc = next - cur;
            let collinear =
                ab.cross(bc).abs() <= tolerance * ab.norm() * bc.norm() && ab.dot(bc) > 0.0;
            if !collinear {
                points.push(cur);
            }
        }
        points.push(self.end());
        Path { points }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for p in &self.points {
            out.push_str(&format!("{},{}\n", p.x, p.y));
        }
        out
    }

    pub fn from_csv(text: &str) -> std::result::Result<Path, String> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut points = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| e.to_string())?;
            if record.len() != 2 {
                return Err(format!("line {}: expected `x,y`", line + 1));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| format!("line {}: {e}", line + 1))
            };
            points.push(Point::new(parse(&record[0])?, parse(&record[1])?));
        }
        Path::new(points).map_err(|e| e.to_string())
    }

    pub fn save_csv(&self, path: impl AsRef<FsPath>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: impl AsRef<FsPath>) -> Result<Path> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Path::from_csv(&text).map_err(|m| Error::parse(path, m))
    }
}
