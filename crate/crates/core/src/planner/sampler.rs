//! State sampler that draws a fixed fraction of samples from a predicted-path
//! grid and the rest uniformly from the local window.

use rand::Rng;
use serde::Serialize;

use crate::geometry::Point;
use crate::grid::{FloatGrid, GridSpec};
use crate::scenario::WINDOW_HALF;

/// Above this share of pixels over threshold the prediction is considered
/// uninformative and sampling falls back to uniform.
pub const UNINFORMATIVE_SUPPORT: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SamplerDiagnostic {
    /// No prediction supplied, or bias fraction 0.
    Uniform,
    Biased,
    /// Prediction had no pixel above threshold.
    EmptySupport,
    /// Prediction was above threshold almost everywhere.
    Uninformative,
}

impl SamplerDiagnostic {
    pub fn is_fallback(self) -> bool {
        matches!(
            self,
            SamplerDiagnostic::EmptySupport | SamplerDiagnostic::Uninformative
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    /// Robot-frame coordinates.
    pub point: Point,
    pub biased: bool,
}

#[derive(Debug, Clone)]
pub struct BiasedSampler {
    bias_fraction: f64,
    spec: Option<GridSpec>,
    /// Pixel index and cumulative weight of every above-threshold pixel.
    pixels: Vec<usize>,
    cumulative: Vec<f64>,
    diagnostic: SamplerDiagnostic,
}

impl BiasedSampler {
    pub fn uniform() -> Self {
        BiasedSampler {
            bias_fraction: 0.0,
            spec: None,
            pixels: Vec::new(),
            cumulative: Vec::new(),
            diagnostic: SamplerDiagnostic::Uniform,
        }
    }

    /// Pixels are weighted by `max(0, p - threshold)`.
    pub fn new(prediction: Option<&FloatGrid>, bias_fraction: f64, threshold: f64) -> Self {
        let Some(grid) = prediction else {
            return BiasedSampler::uniform();
        };
        if bias_fraction <= 0.0 {
            return BiasedSampler::uniform();
        }
        let mut pixels = Vec::new();
        let mut cumulative = Vec::new();
        let mut total = 0.0;
        for (i, &v) in grid.values().iter().enumerate() {
            let w = v as f64 - threshold;
            if w > 0.0 {
                total += w;
                pixels.push(i);
                cumulative.push(total);
            }
        }
        let diagnostic = if pixels.is_empty() {
            SamplerDiagnostic::EmptySupport
        } else if pixels.len() as f64 >= UNINFORMATIVE_SUPPORT * grid.values().len() as f64 {
            SamplerDiagnostic::Uninformative
        } else {
            SamplerDiagnostic::Biased
        };
        if diagnostic.is_fallback() {
            return BiasedSampler {
                diagnostic,
                ..BiasedSampler::uniform()
            };
        }
        BiasedSampler {
            bias_fraction: bias_fraction.min(1.0),
            spec: Some(*grid.spec()),
            pixels,
            cumulative,
            diagnostic,
        }
    }

    pub fn diagnostic(&self) -> SamplerDiagnostic {
        self.diagnostic
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Sample {
        if self.diagnostic == SamplerDiagnostic::Biased && rng.gen::<f64>() < self.bias_fraction {
            let spec = self.spec.as_ref().expect("biased sampler has a grid");
            let total = *self.cumulative.last().expect("non-empty support");
            let u = rng.gen::<f64>() * total;
            let k = self
                .cumulative
                .partition_point(|&c| c <= u)
                .min(self.pixels.len() - 1);
            let idx = self.pixels[k];
            let centre = spec.pixel_center(idx % spec.width, idx / spec.width);
            let jx = rng.gen_range(-0.5..0.5) * spec.resolution;
            let jy = rng.gen_range(-0.5..0.5) * spec.resolution;
            let p = Point::new(
                (centre.x + jx).clamp(-WINDOW_HALF, WINDOW_HALF),
                (centre.y + jy).clamp(-WINDOW_HALF, WINDOW_HALF),
            );
            return Sample {
                point: p,
                biased: true,
            };
        }
        Sample {
            point: Point::new(
                rng.gen_range(-WINDOW_HALF..WINDOW_HALF),
                rng.gen_range(-WINDOW_HALF..WINDOW_HALF),
            ),
            biased: false,
        }
    }
}
