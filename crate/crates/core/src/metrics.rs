//! Path-comparison metrics and evaluation reports.

use std::path::Path as FsPath;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::features::{feature_count, FeatureParams};
use crate::geometry::point_polyline_distance;
use crate::path::{Path, RESAMPLE_STEP};
use crate::scenario::Scenario;

/// Distances below this are rounding residue of points lying on the polyline.
const ZERO_DISTANCE: f64 = 1e-12;

/// Mean distance from the points of `a` (resampled at `step`) to the
/// polyline `b`.
pub fn directed_distance_with(a: &Path, b: &Path, step: f64) -> f64 {
    let pts = a.resampled(step);
    let sum: f64 = pts
        .points()
        .iter()
        .map(|&p| point_polyline_distance(p, b.points()))
        .filter(|&d| d > ZERO_DISTANCE)
        .fold(0.0, |acc, d| acc + d);
    sum / pts.len() as f64
}

pub fn directed_distance(a: &Path, b: &Path) -> f64 {
    directed_distance_with(a, b, RESAMPLE_STEP)
}

/// Symmetrised path distance.
pub fn mu(a: &Path, b: &Path) -> f64 {
    mu_with(a, b, RESAMPLE_STEP)
}

pub fn mu_with(a: &Path, b: &Path, step: f64) -> f64 {
    0.5 * (directed_distance_with(a, b, step) + directed_distance_with(b, a, step))
}

/// Mean absolute per-feature difference of the two paths' feature counts.
pub fn feature_count_difference(
    plan: &Path,
    expert: &Path,
    scenario: &Scenario,
    params: &FeatureParams,
) -> f64 {
    feature_count(plan, scenario, params).mean_abs_diff(&feature_count(expert, scenario, params))
}

/// Fraction of `values` that are `<= t`.
pub fn empirical_cdf(values: &[f64], t: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|&&v| v <= t).count() as f64 / values.len() as f64
}

/// Empirical CDF sampled at `resolution` evenly spaced thresholds from 0 to
/// the largest value.
pub fn cdf_export(values: &[f64], resolution: usize) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() || resolution == 0 {
        return Err(Error::InvalidArgument(
            "CDF needs values and a positive resolution".into(),
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let max = *sorted.last().unwrap();
    let n = sorted.len() as f64;
    Ok((0..resolution)
        .map(|i| {
            let t = if resolution == 1 || i == resolution - 1 {
                max
            } else {
                max * i as f64 / (resolution - 1) as f64
            };
            let count = sorted.partition_point(|&v| v <= t);
            (t, count as f64 / n)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEval {
    pub id: String,
    pub mu: f64,
    pub feature_count_diff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary {
                mean: f64::NAN,
                std_err: f64::NAN,
                n,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std_err = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Summary { mean, std_err, n }
    }
}

/// One plan/expert pair to score.
#[derive(Debug, Clone)]
pub struct EvalItem {
    pub id: String,
    pub plan: Path,
    pub expert: Path,
    pub scenario: Scenario,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub trajectories: Vec<TrajectoryEval>,
}

pub const CDF_RESOLUTION: usize = 101;

impl EvalReport {
    pub fn evaluate(items: &[EvalItem], params: &FeatureParams, exec: Execution) -> EvalReport {
        let trajectories = exec.map(items, |_, it| TrajectoryEval {
            id: it.id.clone(),
            mu: mu(&it.plan, &it.expert),
            feature_count_diff: feature_count_difference(
                &it.plan,
                &it.expert,
                &it.scenario,
                params,
            ),
        });
        EvalReport { trajectories }
    }

    pub fn mu_values(&self) -> Vec<f64> {
        self.trajectories.iter().map(|t| t.mu).collect()
    }

    pub fn mu_summary(&self) -> Summary {
        Summary::of(&self.mu_values())
    }

    pub fn feature_summary(&self) -> Summary {
        Summary::of(
            &self
                .trajectories
                .iter()
                .map(|t| t.feature_count_diff)
                .collect::<Vec<_>>(),
        )
    }

    pub fn per_trajectory_csv(&self) -> String {
        let mut out = String::from("id,mu,feature_count_diff\n");
        for t in &self.trajectories {
            out.push_str(&format!("{},{},{}\n", t.id, t.mu, t.feature_count_diff));
        }
        out
    }

    pub fn aggregate_csv(&self) -> String {
        let mut out = String::from("metric,mean,std_err,n\n");
        for (name, s) in [
            ("mu", self.mu_summary()),
            ("feature_count_diff", self.feature_summary()),
        ] {
            out.push_str(&format!("{name},{},{},{}\n", s.mean, s.std_err, s.n));
        }
        out
    }

    pub fn cdf_csv(&self, resolution: usize) -> Result<String> {
        let mut out = String::from("threshold,fraction\n");
        for (t, f) in cdf_export(&self.mu_values(), resolution)? {
            out.push_str(&format!("{t},{f}\n"));
        }
        Ok(out)
    }

    /// Writes `<prefix>per_trajectory.csv`, `<prefix>aggregate.csv` and
    /// `<prefix>cdf.csv` into `dir`.
    pub fn write(&self, dir: impl AsRef<FsPath>, prefix: &str) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            ("per_trajectory.csv", self.per_trajectory_csv()),
            ("aggregate.csv", self.aggregate_csv()),
            ("cdf.csv", self.cdf_csv(CDF_RESOLUTION)?),
        ];
        for (name, body) in files {
            let p = dir.join(format!("{prefix}{name}"));
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Pose2D};
    use crate::scenario::Person;

    fn line(a: (f64, f64), b: (f64, f64)) -> Path {
        Path::new(vec![Point::new(a.0, a.1), Point::new(b.0, b.1)]).unwrap()
    }

    #[test]
    fn identical_paths_are_zero() {
        let p = Path::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.3),
            Point::new(2.0, -1.0),
        ])
        .unwrap();
        assert_eq!(directed_distance(&p, &p), 0.0);
        assert_eq!(mu(&p, &p), 0.0);
    }

    #[test]
    fn parallel_offset_segments() {
        let a = line((0.0, 0.0), (3.0, 0.0));
        let b = line((0.0, 1.0), (3.0, 1.0));
        assert!((directed_distance(&a, &b) - 1.0).abs() < 1e-12);
        assert!((directed_distance(&b, &a) - 1.0).abs() < 1e-12);
        assert!((mu(&a, &b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closest_point_uses_segment_interiors() {
        // A single long segment: vertex-only distance would be 1.5 at the midpoint.
        let a = Path::single(Point::new(1.5, 0.2));
        let b = line((0.0, 0.0), (3.0, 0.0));
        assert!((directed_distance(&a, &b) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn mu_is_symmetric() {
        let a = line((0.0, 0.0), (3.0, 0.5));
        let b = Path::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(3.0, 0.0),
        ])
        .unwrap();
        assert_eq!(mu(&a, &b), mu(&b, &a));
    }

    #[test]
    fn cdf_examples() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(empirical_cdf(&v, 2.5), 0.5);
        let cdf = cdf_export(&[2.0], 5).unwrap();
        assert_eq!(
            cdf.iter().map(|c| c.1).collect::<Vec<_>>(),
            vec![0.0, 0.0, 0.0, 0.0, 1.0]
        );
        assert_eq!(cdf.last().unwrap().0, 2.0);
        let cdf = cdf_export(&v, 9).unwrap();
        assert!(cdf.windows(2).all(|w| w[0].1 <= w[1].1 && w[0].0 <= w[1].0));
        assert_eq!(cdf.last().unwrap().1, 1.0);
        assert_eq!(cdf[5], (2.5, 0.5));
        assert!(cdf_export(&[], 10).is_err());
    }

    #[test]
    fn reversed_expert_has_zero_feature_difference() {
        let s = Scenario::new(Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(3.0, 0.0, 0.0))
            .with_person(Person::new(Pose2D::new(1.5, 0.5, 1.0)));
        let p = Path::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.5, -0.7),
            Point::new(3.0, 0.0),
        ])
        .unwrap();
        let params = FeatureParams::default();
        assert_eq!(feature_count_difference(&p, &p, &s, &params), 0.0);
        assert!(feature_count_difference(&p, &p.reversed(), &s, &params) < 1e-12);
        assert!(feature_count_difference(&p, &line((0.0, 0.0), (3.0, 0.0)), &s, &params) > 0.0);
    }

    #[test]
    fn report_csvs() {
        let s = Scenario::new(Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(3.0, 0.0, 0.0));
        let items = vec![
            EvalItem {
                id: "a".into(),
                plan: line((0.0, 0.0), (3.0, 0.0)),
                expert: line((0.0, 0.0), (3.0, 0.0)),
                scenario: s.clone(),
            },
            EvalItem {
                id: "b".into(),
                plan: line((0.0, 1.0), (3.0, 1.0)),
                expert: line((0.0, 0.0), (3.0, 0.0)),
                scenario: s,
            },
        ];
        let r = EvalReport::evaluate(&items, &FeatureParams::default(), Execution::Sequential);
        let m = r.mu_summary();
        assert!((m.mean - 0.5).abs() < 1e-12);
        assert!((m.std_err - 0.5).abs() < 1e-12);
        let csv = r.per_trajectory_csv();
        assert!(
            csv.starts_with("id,mu,feature_count_diff\na,0,0\n"),
            "{csv}"
        );
        assert!(r
            .aggregate_csv()
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("mu,0.5,"));
        let dir = tempfile::tempdir().unwrap();
        r.write(dir.path(), "fcn_").unwrap();
        assert!(dir.path().join("fcn_cdf.csv").exists());
    }
}
