use crate::error::{Error, Result};
use crate::grid::{FloatGrid, GridSpec};

/// Dense `channels × height × width` array, row-major within each channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Tensor {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::ShapeMismatch {
                expected: format!(
                    "{channels}x{height}x{width} = {}",
                    channels * height * width
                ),
                actual: format!("{} values", data.len()),
            });
        }
        Ok(Tensor {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn filled(channels: usize, height: usize, width: usize, v: f64) -> Self {
        Tensor {
            channels,
            height,
            width,
            data: vec![v; channels * height * width],
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn from_grid(grid: &FloatGrid) -> Tensor {
        Tensor {
            channels: 1,
            height: grid.height(),
            width: grid.width(),
            data: grid.values().iter().map(|&v| v as f64).collect(),
        }
    }

    /// Single-channel tensor back to a grid in the given frame.
    pub fn to_grid(&self, spec: GridSpec) -> Result<FloatGrid> {
        if self.channels != 1 || self.height != spec.height || self.width != spec.width {
            return Err(Error::ShapeMismatch {
                expected: format!("1x{}x{}", spec.height, spec.width),
                actual: format!("{}x{}x{}", self.channels, self.height, self.width),
            });
        }
        FloatGrid::from_values(spec, self.data.iter().map(|&v| v as f32).collect())
    }

    /// Translates every channel by (`dx`, `dy`) pixels, filling with zeros.
    pub fn shifted(&self, dx: i64, dy: i64) -> Tensor {
        let mut out = Tensor::zeros(self.channels, self.height, self.width);
        for c in 0..self.channels {
            for y in 0..self.height as i64 {
                for x in 0..self.width as i64 {
                    let (sx, sy) = (x - dx, y - dy);
                    if sx >= 0 && sy >= 0 && sx < self.width as i64 && sy < self.height as i64 {
                        out.data[(c * self.height + y as usize) * self.width + x as usize] =
                            self.at(c, sy as usize, sx as usize);
                    }
                }
            }
        }
        out
    }

    /// One of the eight symmetries of the square about pixel (w/2, h/2):
    /// bit 0 mirrors x, bit 1 mirrors y, bit 2 swaps the axes. Mirrored
    /// indices wrap, so the outermost row or column on the low side maps
    /// onto itself.
    pub fn dihedral(&self, k: u8) -> Tensor {
        assert_eq!(self.height, self.width, "dihedral maps need a square tensor");
        let n = self.width;
        let mirror = |i: usize| (n - i) % n;
        let mut out = Tensor::zeros(self.channels, n, n);
        for c in 0..self.channels {
            for y in 0..n {
                for x in 0..n {
                    let (mut sx, mut sy) = (x, y);
                    if k & 4 != 0 {
                        std::mem::swap(&mut sx, &mut sy);
                    }
                    if k & 1 != 0 {
                        sx = mirror(sx);
                    }
                    if k & 2 != 0 {
                        sy = mirror(sy);
                    }
                    out.data[(c * n + y) * n + x] = self.at(c, sy, sx);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> Tensor {
        Tensor::from_vec(1, n, n, (0..n * n).map(|i| i as f64).collect()).unwrap()
    }

    #[test]
    fn dihedral_maps_fix_the_centre_and_are_distinct() {
        let t = ramp(8);
        let images: Vec<Tensor> = (0..8).map(|k| t.dihedral(k)).collect();
        for (k, im) in images.iter().enumerate() {
            assert_eq!(im.at(0, 4, 4), t.at(0, 4, 4), "k = {k}");
            for other in &images[..k] {
                assert_ne!(im, other);
            }
        }
        assert_eq!(images[0], t);
    }

    #[test]
    fn mirrors_and_the_swap_are_involutions() {
        let t = ramp(6);
        for k in [1, 2, 3, 4] {
            assert_eq!(t.dihedral(k).dihedral(k), t);
        }
        // Mirror x then swap equals a quarter turn; four of them are the identity.
        let turn = |x: &Tensor| x.dihedral(1).dihedral(4);
        assert_eq!(turn(&turn(&turn(&turn(&t)))), t);
        assert_eq!(t.dihedral(1).at(0, 2, 1), t.at(0, 2, 5));
    }
}
