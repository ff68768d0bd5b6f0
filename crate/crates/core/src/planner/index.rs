use crate::geometry::Point;
use crate::scenario::WINDOW_HALF;

/// Bucket grid over the robot-frame window for nearest and radius queries.
#[derive(Debug, Clone)]
pub(crate) struct SpatialIndex {
    cell: f64,
    dim: usize,
    buckets: Vec<Vec<(usize, Point)>>,
}

impl SpatialIndex {
    pub fn new(cell: f64) -> Self {
        let dim = ((2.0 * WINDOW_HALF) / cell).ceil() as usize + 1;
        SpatialIndex {
            cell,
            dim,
            buckets: vec![Vec::new(); dim * dim],
        }
    }

    fn cell_of(&self, p: Point) -> (i64, i64) {
        let clamp =
            |v: f64| (((v + WINDOW_HALF) / self.cell).floor() as i64).clamp(0, self.dim as i64 - 1);
        (clamp(p.x), clamp(p.y))
    }

    /// Stores `id` at robot-frame position `local`.
    pub fn insert(&mut self, id: usize, local: Point) {
        let (cx, cy) = self.cell_of(local);
        self.buckets[cy as usize * self.dim + cx as usize].push((id, local));
    }

    fn bucket(&self, cx: i64, cy: i64) -> &[(usize, Point)] {
        if cx < 0 || cy < 0 || cx >= self.dim as i64 || cy >= self.dim as i64 {
            return &[];
        }
        &self.buckets[cy as usize * self.dim + cx as usize]
    }

    /// Nearest stored point; ties resolve to the lowest id.
    pub fn nearest(&self, q: Point) -> Option<usize> {
        let (cx, cy) = self.cell_of(q);
        let mut best: Option<(f64, usize)> = None;
        for ring in 0..self.dim as i64 {
            for dy in -ring..=ring {
                for dx in -ring..=ring {
                    if dx.abs() != ring && dy.abs() != ring {
                        continue;
                    }
                    for &(id, p) in self.bucket(cx + dx, cy + dy) {
                        let d = (p - q).norm_squared();
                        let better = match best {
                            None => true,
                            Some((bd, bid)) => d < bd || (d == bd && id < bid),
                        };
                        if better {
                            best = Some((d, id));
                        }
                    }
                }
            }
            if let Some((d, _)) = best {
                let reach = ring as f64 * self.cell;
                if d.sqrt() <= reach {
                    break;
                }
            }
        }
        best.map(|(_, id)| id)
    }

    /// Ids within `radius` of `q`, ascending.
    pub fn within(&self, q: Point, radius: f64) -> Vec<usize> {
        let (x0, y0) = self.cell_of(Point::new(q.x - radius, q.y - radius));
        let (x1, y1) = self.cell_of(Point::new(q.x + radius, q.y + radius));
        let r2 = radius * radius;
        let mut out = Vec::new();
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                out.extend(
                    self.bucket(cx, cy)
                        .iter()
                        .filter(|(_, p)| (*p - q).norm_squared() <= r2)
                        .map(|(id, _)| *id),
                );
            }
        }
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut index = SpatialIndex::new(0.5);
        let pts: Vec<Point> = (0..500)
            .map(|_| Point::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)))
            .collect();
        for (i, &p) in pts.iter().enumerate() {
            index.insert(i, p);
        }
        for _ in 0..200 {
            let q = Point::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let brute = (0..pts.len())
                .min_by(|&a, &b| {
                    (pts[a] - q)
                        .norm()
                        .partial_cmp(&(pts[b] - q).norm())
                        .unwrap()
                })
                .unwrap();
            assert_eq!(index.nearest(q), Some(brute));
            let r = rng.gen_range(0.1..1.5);
            let expect: Vec<usize> = (0..pts.len())
                .filter(|&i| (pts[i] - q).norm_squared() <= r * r)
                .collect();
            assert_eq!(index.within(q, r), expect);
        }
    }
}
