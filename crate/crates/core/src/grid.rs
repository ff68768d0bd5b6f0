//! Metric raster grids and their on-disk formats.
//!
//! Pixel `(col, row)` has its centre at `origin + (col, row) * resolution`; row 0
//! is the minimum-y row. Robot-centred grids live in the robot-local frame.

use std::fs;
use std::io::Write;
use std::path::Path as FsPath;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::scenario::WINDOW_SIZE;

const FGRID_MAGIC: &str = "FGRID";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: Point,
}

impl GridSpec {
    pub fn new(width: usize, height: usize, resolution: f64, origin: Point) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(
                "grid dimensions must be positive".into(),
            ));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "grid resolution must be positive, got {resolution}"
            )));
        }
        Ok(GridSpec {
            width,
            height,
            resolution,
            origin,
        })
    }

    /// Square grid whose pixel `(size/2, size/2)` is centred on the local origin.
    pub fn robot_centered(size: usize, resolution: f64) -> Result<Self> {
        let half = (size / 2) as f64 * resolution;
        GridSpec::new(size, size, resolution, Point::new(-half, -half))
    }

    /// Square grid of `size` pixels spanning the full local window.
    pub fn window(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidArgument("grid size must be positive".into()));
        }
        GridSpec::robot_centered(size, WINDOW_SIZE / size as f64)
    }

    /// 200×200 pixels at 0.05 m/pixel.
    pub fn full_scale() -> Self {
        GridSpec::robot_centered(200, 0.05).expect("static spec is valid")
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center_pixel(&self) -> (usize, usize) {
        (self.width / 2, self.height / 2)
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    pub fn pixel_center(&self, col: usize, row: usize) -> Point {
        Point::new(
            self.origin.x + col as f64 * self.resolution,
            self.origin.y + row as f64 * self.resolution,
        )
    }

    pub fn grid_to_world(&self, col: i64, row: i64) -> Result<Point> {
        if col < 0 || row < 0 || col as usize >= self.width || row as usize >= self.height {
            return Err(self.out_of_bounds(col, row));
        }
        Ok(self.pixel_center(col as usize, row as usize))
    }

    /// Continuous pixel coordinates (pixel centres at integers).
    pub fn continuous(&self, p: Point) -> (f64, f64) {
        (
            (p.x - self.origin.x) / self.resolution,
            (p.y - self.origin.y) / self.resolution,
        )
    }

    /// Pixel containing `p`, if any.
    pub fn locate(&self, p: Point) -> Option<(usize, usize)> {
        let (fx, fy) = self.continuous(p);
        let col = fx.round();
        let row = fy.round();
        if col < 0.0 || row < 0.0 || col >= self.width as f64 || row >= self.height as f64 {
            return None;
        }
        Some((col as usize, row as usize))
    }

    pub fn world_to_grid(&self, p: Point) -> Result<(usize, usize)> {
        self.locate(p).ok_or_else(|| {
            let (fx, fy) = self.continuous(p);
            self.out_of_bounds(fx.round() as i64, fy.round() as i64)
        })
    }

    fn out_of_bounds(&self, col: i64, row: i64) -> Error {
        Error::OutOfBounds {
            col,
            row,
            width: self.width,
            height: self.height,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloatGrid {
    spec: GridSpec,
    values: Vec<f32>,
}

impl FloatGrid {
    pub fn zeros(spec: GridSpec) -> Self {
        FloatGrid {
            spec,
            values: vec![0.0; spec.len()],
        }
    }

    pub fn from_values(spec: GridSpec, values: Vec<f32>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values", spec.len()),
                actual: format!("{} values", values.len()),
            });
        }
        Ok(FloatGrid { spec, values })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn width(&self) -> usize {
        self.spec.width
    }

    pub fn height(&self) -> usize {
        self.spec.height
    }

    pub fn resolution(&self) -> f64 {
        self.spec.resolution
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn get(&self, col: usize, row: usize) -> f32 {
        self.values[self.spec.index(col, row)]
    }

    pub fn set(&mut self, col: usize, row: usize, v: f32) {
        let i = self.spec.index(col, row);
        self.values[i] = v;
    }

    /// Writes `v` unless the pixel already holds something brighter.
    pub fn paint_max(&mut self, col: usize, row: usize, v: f32) {
        let i = self.spec.index(col, row);
        if self.values[i] < v {
            self.values[i] = v;
        }
    }

    /// Bilinear interpolation between pixel centres, clamped at the border.
    pub fn sample_bilinear(&self, p: Point) -> f64 {
        let (fx, fy) = self.spec.continuous(p);
        let fx = fx.clamp(0.0, (self.spec.width - 1) as f64);
        let fy = fy.clamp(0.0, (self.spec.height - 1) as f64);
        let c0 = fx.floor() as usize;
        let r0 = fy.floor() as usize;
        let c1 = (c0 + 1).min(self.spec.width - 1);
        let r1 = (r0 + 1).min(self.spec.height - 1);
        let tx = fx - c0 as f64;
        let ty = fy - r0 as f64;
        let v00 = self.get(c0, r0) as f64;
        let v10 = self.get(c1, r0) as f64;
        let v01 = self.get(c0, r1) as f64;
        let v11 = self.get(c1, r1) as f64;
        let top = v00 + (v10 - v00) * tx;
        let bottom = v01 + (v11 - v01) * tx;
        top + (bottom - top) * ty
    }

    pub fn count_above(&self, threshold: f32) -> usize {
        self.values.iter().filter(|&&v| v > threshold).count()
    }

    pub fn mse(&self, other: &FloatGrid) -> Result<f64> {
        if self.spec.width != other.spec.width || self.spec.height != other.spec.height {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", self.spec.width, self.spec.height),
                actual: format!("{}x{}", other.spec.width, other.spec.height),
            });
        }
        let sum: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| {
                let d = *a as f64 - *b as f64;
                d * d
            })
            .sum();
        Ok(sum / self.values.len() as f64)
    }

    pub fn to_fgrid_bytes(&self) -> Vec<u8> {
        let s = &self.spec;
        let mut out = format!(
            "{FGRID_MAGIC} {} {} {} {} {}\n",
            s.width, s.height, s.resolution, s.origin.x, s.origin.y
        )
        .into_bytes();
        out.reserve(self.values.len() * 4);
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_fgrid_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let newline = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or("missing FGRID header line")?;
        let header = std::str::from_utf8(&bytes[..newline]).map_err(|_| "header is not ASCII")?;
        let fields: Vec<&str> = header.split(' ').collect();
        if fields.len() != 6 || fields[0] != FGRID_MAGIC {
            return Err(format!("malformed FGRID header {header:?}"));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|e| format!("{s:?}: {e}"));
        let real = |s: &str| s.parse::<f64>().map_err(|e| format!("{s:?}: {e}"));
        let spec = GridSpec::new(
            int(fields[1])?,
            int(fields[2])?,
            real(fields[3])?,
            Point::new(real(fields[4])?, real(fields[5])?),
        )
        .map_err(|e| e.to_string())?;
        let body = &bytes[newline + 1..];
        if body.len() != spec.len() * 4 {
            return Err(format!(
                "expected {} bytes of grid data, found {}",
                spec.len() * 4,
                body.len()
            ));
        }
        let values = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(FloatGrid { spec, values })
    }

    pub fn save_fgrid(&self, path: impl AsRef<FsPath>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_fgrid_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load_fgrid(path: impl AsRef<FsPath>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        FloatGrid::from_fgrid_bytes(&bytes).map_err(|m| Error::parse(path, m))
    }

    /// Binary PGM (P5), top image row = maximum y.
    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let (w, h) = (self.spec.width, self.spec.height);
        let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
        for row in (0..h).rev() {
            for col in 0..w {
                let v = (self.get(col, row) as f64 * 255.0)
                    .round()
                    .clamp(0.0, 255.0);
                out.push(v as u8);
            }
        }
        out
    }

    pub fn save_pgm(&self, path: impl AsRef<FsPath>) -> Result<()> {
        let path = path.as_ref();
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_pgm_bytes())
            .map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn full_scale_covers_ten_meters() {
        let spec = GridSpec::full_scale();
        assert_eq!((spec.width, spec.height), (200, 200));
        assert!((spec.width as f64 * spec.resolution - 10.0).abs() < 1e-12);
    }

    #[test]
    fn centre_pixel_maps_to_local_origin() {
        let spec = GridSpec::full_scale();
        let (c, r) = spec.center_pixel();
        assert_eq!(
            spec.grid_to_world(c as i64, r as i64).unwrap(),
            Point::new(0.0, 0.0)
        );
        assert_eq!(
            spec.world_to_grid(Point::new(1.0, 0.0)).unwrap(),
            (c + 20, r)
        );
    }

    #[test]
    fn out_of_bounds_pixels_error() {
        let spec = GridSpec::window(64).unwrap();
        assert!(matches!(
            spec.grid_to_world(64, 0),
            Err(Error::OutOfBounds { .. })
        ));
        assert!(spec.grid_to_world(-1, 3).is_err());
        assert!(spec.world_to_grid(Point::new(9.0, 0.0)).is_err());
    }

    #[test]
    fn bilinear_midpoint() {
        let spec = GridSpec::new(2, 1, 1.0, Point::new(0.0, 0.0)).unwrap();
        let g = FloatGrid::from_values(spec, vec![0.0, 1.0]).unwrap();
        assert_eq!(g.sample_bilinear(Point::new(0.5, 0.0)), 0.5);
        assert_eq!(g.sample_bilinear(Point::new(-3.0, 0.0)), 0.0);
        assert_eq!(g.sample_bilinear(Point::new(7.0, 0.0)), 1.0);
    }

    #[test]
    fn fgrid_header_layout() {
        let spec = GridSpec::new(2, 1, 0.05, Point::new(-5.0, -5.0)).unwrap();
        let g = FloatGrid::from_values(spec, vec![0.25, 1.0]).unwrap();
        let bytes = g.to_fgrid_bytes();
        let header = b"FGRID 2 1 0.05 -5 -5\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(
            &bytes[header.len()..],
            &[0, 0, 0x80, 0x3e, 0, 0, 0x80, 0x3f]
        );
        assert!(FloatGrid::from_fgrid_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(FloatGrid::from_fgrid_bytes(b"FGRD 1 1 1 0 0\n\0\0\0\0").is_err());
    }

    #[test]
    fn pgm_rows_are_flipped_and_scaled() {
        let spec = GridSpec::new(1, 2, 1.0, Point::new(0.0, 0.0)).unwrap();
        let g = FloatGrid::from_values(spec, vec![0.0, 0.6]).unwrap();
        let bytes = g.to_pgm_bytes();
        assert_eq!(&bytes[..bytes.len() - 2], b"P5\n1 2\n255\n");
        assert_eq!(&bytes[bytes.len() - 2..], &[153, 0]);
    }

    proptest! {
        #[test]
        fn fgrid_round_trip_is_bit_exact(
            w in 1usize..8, h in 1usize..8,
            res in 0.001f64..2.0, ox in -50.0f64..50.0, oy in -50.0f64..50.0,
            seed in any::<u32>(),
        ) {
            let spec = GridSpec::new(w, h, res, Point::new(ox, oy)).unwrap();
            let values = (0..w * h)
                .map(|i| f32::from_bits(seed.wrapping_mul(2654435761).wrapping_add(i as u32) & 0x3fff_ffff))
                .collect();
            let g = FloatGrid::from_values(spec, values).unwrap();
            let bytes = g.to_fgrid_bytes();
            let back = FloatGrid::from_fgrid_bytes(&bytes).unwrap();
            prop_assert_eq!(back.to_fgrid_bytes(), bytes);
            prop_assert_eq!(back.spec(), g.spec());
        }

        #[test]
        fn world_grid_round_trip(x in -4.9f64..4.9, y in -4.9f64..4.9) {
            let spec = GridSpec::full_scale();
            let p = Point::new(x, y);
            let (c, r) = spec.world_to_grid(p).unwrap();
            let q = spec.grid_to_world(c as i64, r as i64).unwrap();
            prop_assert!((q.x - x).abs() <= 0.025 + 1e-12);
            prop_assert!((q.y - y).abs() <= 0.025 + 1e-12);
            prop_assert_eq!(spec.world_to_grid(q).unwrap(), (c, r));
        }
    }
}
