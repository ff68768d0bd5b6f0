use std::io::Write as _;
use std::path::Path as FsPath;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{
    concat_backward, concat_forward, conv_backward, conv_forward, upsample_backward,
    upsample_forward, Activation, ConvCache, ConvSpec, LayerSpec,
};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Bounds on the reference network's size.
pub const REFERENCE_PARAM_RANGE: (usize, usize) = (50_000, 200_000);

/// Coarse-branch widths and fine-branch width of the reference network.
pub const COARSE_CHANNELS: [usize; 3] = [24, 64, 32];
pub const FINE_CHANNELS: usize = 16;

const MODEL_MAGIC: &str = "FCN1";

/// Initial output level: roughly the share of path pixels in a label.
pub const OUTPUT_PRIOR: f64 = 0.01;

/// Weights (`out × in × k × k`) and biases of one layer; both empty for
/// parameter-free layers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerParams {
    fn zeros_for(spec: &LayerSpec) -> Self {
        match spec {
            LayerSpec::Conv(c) => LayerParams {
                weights: vec![0.0; c.weight_len()],
                bias: vec![0.0; c.out_channels],
            },
            _ => LayerParams::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.bias)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(&mut self.bias)
    }
}

/// Parameter gradients, laid out like [`NetworkModel::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerParams>,
}

impl Gradients {
    pub fn zeros_like(model: &NetworkModel) -> Self {
        Gradients {
            layers: model.layers.iter().map(LayerParams::zeros_for).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.iter_mut().zip(b.iter()).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.layers
            .iter_mut()
            .for_each(|l| l.iter_mut().for_each(|x| *x *= s));
    }

    pub fn flat(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.iter().copied()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.iter())
            .fold(0.0, |m: f64, x| m.max(x.abs()))
    }
}

/// A sequential stack of layers over a fixed input size. `ConcatInput` is the
/// skip connection that joins the coarse branch to the raw input.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    input_shape: (usize, usize, usize),
    layers: Vec<LayerSpec>,
    params: Vec<LayerParams>,
}

impl NetworkModel {
    /// Zero-initialised model. Checks that shapes line up for `input_shape`
    /// and that the last layer is a 1×1 conv producing one channel at the
    /// input resolution.
    pub fn new(input_shape: (usize, usize, usize), layers: Vec<LayerSpec>) -> Result<Self> {
        let shapes = shape_trace(input_shape, &layers)?;
        let out = *shapes.last().unwrap();
        match layers.last() {
            Some(LayerSpec::Conv(c)) if c.kernel == 1 && c.out_channels == 1 => {}
            _ => {
                return Err(Error::InvalidArgument(
                    "the output layer must be a 1x1 conv with one channel".into(),
                ))
            }
        }
        if (out.1, out.2) != (input_shape.1, input_shape.2) {
            return Err(Error::ShapeMismatch {
                expected: format!("output {}x{}", input_shape.1, input_shape.2),
                actual: format!("{}x{}", out.1, out.2),
            });
        }
        let params = layers.iter().map(LayerParams::zeros_for).collect();
        Ok(NetworkModel {
            input_shape,
            layers,
            params,
        })
    }

    /// He-uniform weights for ReLU convs, Xavier-uniform for the rest. Biases
    /// start at zero except on the output layer, which starts at the logit of
    /// [`OUTPUT_PRIOR`] so training does not begin by pushing every pixel
    /// down from 0.5.
    pub fn initialized(mut self, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let last = self.layers.len() - 1;
        for (i, (spec, p)) in self.layers.iter().zip(&mut self.params).enumerate() {
            if let LayerSpec::Conv(c) = spec {
                let bound = match c.activation {
                    Activation::Relu => (6.0 / c.fan_in() as f64).sqrt(),
                    _ => (6.0 / (c.fan_in() + c.fan_out()) as f64).sqrt(),
                };
                p.weights
                    .iter_mut()
                    .for_each(|w| *w = rng.gen_range(-bound..bound));
                let b0 = if i == last && c.activation == Activation::Sigmoid {
                    (OUTPUT_PRIOR / (1.0 - OUTPUT_PRIOR)).ln()
                } else {
                    0.0
                };
                p.bias.iter_mut().for_each(|b| *b = b0);
            }
        }
        self
    }

    pub fn input_shape(&self) -> (usize, usize, usize) {
        self.input_shape
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[LayerParams] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [LayerParams] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.params.iter().flat_map(|l| l.iter().copied()).collect()
    }

    pub fn set_flat_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} parameters", self.param_count()),
                actual: format!("{}", values.len()),
            });
        }
        let mut it = values.iter();
        for p in &mut self.params {
            p.iter_mut().for_each(|x| *x = *it.next().unwrap());
        }
        Ok(())
    }

    /// Activation shapes after each layer, starting with the input.
    pub fn shapes(&self) -> Vec<(usize, usize, usize)> {
        shape_trace(self.input_shape, &self.layers).expect("validated at construction")
    }

    fn check_input(&self, input: &Tensor) -> Result<()> {
        if input.shape() != self.input_shape {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.input_shape),
                actual: format!("{:?}", input.shape()),
            });
        }
        if let Some(v) = input.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!(
                "input value {v} outside [0, 1]"
            )));
        }
        Ok(())
    }

    /// Output of every layer in order; the last entry is the network output.
    pub fn forward_trace(&self, input: &Tensor) -> Result<Vec<Tensor>> {
        self.check_input(input)?;
        Ok(self.run(input).into_iter().map(|(t, _)| t).collect())
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        Ok(self.forward_trace(input)?.pop().unwrap())
    }

    /// Output of the last layer before the first upsample.
    pub fn coarse_features(&self, input: &Tensor) -> Result<Tensor> {
        let split = self
            .layers
            .iter()
            .position(|l| matches!(l, LayerSpec::Upsample { .. }))
            .ok_or_else(|| Error::InvalidArgument("network has no upsample layer".into()))?;
        if split == 0 {
            return Ok(input.clone());
        }
        Ok(self.forward_trace(input)?.swap_remove(split - 1))
    }

    fn run(&self, input: &Tensor) -> Vec<(Tensor, Option<ConvCache>)> {
        let mut acts: Vec<(Tensor, Option<ConvCache>)> = Vec::with_capacity(self.layers.len());
        for (i, (spec, p)) in self.layers.iter().zip(&self.params).enumerate() {
            let x = if i == 0 { input } else { &acts[i - 1].0 };
            let next = match spec {
                LayerSpec::Conv(c) => {
                    let (out, cache) = conv_forward(x, c, &p.weights, &p.bias);
                    (out, Some(cache))
                }
                LayerSpec::Upsample { factor } => (upsample_forward(x, *factor), None),
                LayerSpec::ConcatInput => (concat_forward(x, input), None),
            };
            acts.push(next);
        }
        acts
    }

    /// Mean squared error over all pixels and its gradient for every
    /// parameter. `positive_weight` scales the squared error of label pixels
    /// above 0.5 (1.0 = plain MSE).
    pub fn loss_and_gradient_weighted(
        &self,
        input: &Tensor,
        label: &Tensor,
        positive_weight: f64,
    ) -> Result<(f64, Gradients)> {
        self.check_input(input)?;
        let out_shape = (1, self.input_shape.1, self.input_shape.2);
        if label.shape() != out_shape {
            return Err(Error::ShapeMismatch {
                expected: format!("label {out_shape:?}"),
                actual: format!("{:?}", label.shape()),
            });
        }
        let acts = self.run(input);
        let out = &acts.last().unwrap().0;
        let n = out.data.len() as f64;
        let mut loss = 0.0;
        let mut grad = Tensor::zeros(1, out.height, out.width);
        for ((g, &o), &l) in grad.data.iter_mut().zip(&out.data).zip(&label.data) {
            let w = if l > 0.5 { positive_weight } else { 1.0 };
            let d = o - l;
            loss += w * d * d;
            *g = 2.0 * w * d / n;
        }
        loss /= n;

        let mut grads = Gradients::zeros_like(self);
        for i in (0..self.layers.len()).rev() {
            let x_shape = if i == 0 {
                input.shape()
            } else {
                acts[i - 1].0.shape()
            };
            grad = match &self.layers[i] {
                LayerSpec::Conv(c) => {
                    let (out_i, cache) = &acts[i];
                    let gl = &mut grads.layers[i];
                    match conv_backward(
                        out_i,
                        grad,
                        cache.as_ref().unwrap(),
                        c,
                        &self.params[i].weights,
                        &mut gl.weights,
                        &mut gl.bias,
                        i > 0,
                    ) {
                        Some(g) => g,
                        None => break,
                    }
                }
                LayerSpec::Upsample { factor } => {
                    upsample_backward(&grad, *factor, x_shape.1, x_shape.2)
                }
                LayerSpec::ConcatInput => concat_backward(&grad, x_shape.0),
            };
        }
        Ok((loss, grads))
    }

    pub fn loss_and_gradient(&self, input: &Tensor, label: &Tensor) -> Result<(f64, Gradients)> {
        self.loss_and_gradient_weighted(input, label, 1.0)
    }

    pub fn loss(&self, input: &Tensor, label: &Tensor) -> Result<f64> {
        let out = self.forward(input)?;
        if out.shape() != label.shape() {
            return Err(Error::ShapeMismatch {
                expected: format!("label {:?}", out.shape()),
                actual: format!("{:?}", label.shape()),
            });
        }
        let n = out.data.len() as f64;
        Ok(out
            .data
            .iter()
            .zip(&label.data)
            .map(|(o, l)| (o - l) * (o - l))
            .sum::<f64>()
            / n)
    }

    /// `FCN1` header, layer count, one line per layer, `end`, then all
    /// parameters as little-endian f32 (per layer: weights, then biases).
    pub fn to_bytes(&self) -> Vec<u8> {
        let (c, h, w) = self.input_shape;
        let mut out = format!(
            "{MODEL_MAGIC}\ninput {c} {h} {w}\nlayers {}\n",
            self.layers.len()
        );
        for l in &self.layers {
            out.push_str(&l.to_string());
            out.push('\n');
        }
        out.push_str("end\n");
        let mut bytes = out.into_bytes();
        for p in &self.params {
            for &v in p.iter() {
                bytes.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        bytes
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut pos = 0;
        let mut next_line = || -> std::result::Result<&str, String> {
            let rest = &bytes[pos..];
            let end = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or("truncated header")?;
            pos += end + 1;
            std::str::from_utf8(&rest[..end]).map_err(|e| e.to_string())
        };
        if next_line()? != MODEL_MAGIC {
            return Err("missing FCN1 magic".into());
        }
        let dims: Vec<usize> = next_line()?
            .strip_prefix("input ")
            .ok_or("expected input line")?
            .split_whitespace()
            .map(|t| t.parse().map_err(|e| format!("input shape: {e}")))
            .collect::<std::result::Result<_, _>>()?;
        let [c, h, w] = dims[..] else {
            return Err("input line needs three dimensions".into());
        };
        let count: usize = next_line()?
            .strip_prefix("layers ")
            .ok_or("expected layers line")?
            .parse()
            .map_err(|e| format!("layer count: {e}"))?;
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            layers.push(next_line()?.parse::<LayerSpec>()?);
        }
        if next_line()? != "end" {
            return Err("expected end of architecture".into());
        }
        let mut model = NetworkModel::new((c, h, w), layers).map_err(|e| e.to_string())?;
        let body = &bytes[pos..];
        if body.len() != model.param_count() * 4 {
            return Err(format!(
                "expected {} parameter bytes, found {}",
                model.param_count() * 4,
                body.len()
            ));
        }
        let values: Vec<f64> = body
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        model.set_flat_params(&values).map_err(|e| e.to_string())?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<FsPath>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|m| Error::parse(path, m))
    }
}

fn shape_trace(
    input: (usize, usize, usize),
    layers: &[LayerSpec],
) -> Result<Vec<(usize, usize, usize)>> {
    if layers.is_empty() {
        return Err(Error::InvalidArgument("network has no layers".into()));
    }
    if input.0 == 0 || input.1 == 0 || input.2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "empty input shape {input:?}"
        )));
    }
    let mut shapes = vec![input];
    for l in layers {
        let next = l.output_shape(*shapes.last().unwrap(), input)?;
        shapes.push(next);
    }
    Ok(shapes)
}

fn conv(
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    activation: Activation,
) -> LayerSpec {
    LayerSpec::Conv(ConvSpec {
        in_channels,
        out_channels,
        kernel,
        stride,
        padding: kernel / 2,
        activation,
    })
}

/// Coarse branch (three stride-2 convs), ×8 bilinear upsample, concat with
/// the input, then the fine branch ending in a 1×1 sigmoid conv, with the
/// given widths.
pub fn two_branch_layers(coarse: [usize; 3], fine: usize) -> Vec<LayerSpec> {
    let [c1, c2, c3] = coarse;
    vec![
        conv(1, c1, 7, 2, Activation::Relu),
        conv(c1, c2, 5, 2, Activation::Relu),
        conv(c2, c3, 3, 2, Activation::Relu),
        LayerSpec::Upsample { factor: 8 },
        LayerSpec::ConcatInput,
        conv(c3 + 1, fine, 3, 1, Activation::Relu),
        conv(fine, fine, 3, 1, Activation::Relu),
        conv(fine, 1, 1, 1, Activation::Sigmoid),
    ]
}

/// The reference two-branch network for a square `grid_size` input,
/// zero-initialised (call [`NetworkModel::initialized`] before training).
pub fn build_reference_network(grid_size: usize) -> Result<NetworkModel> {
    if grid_size == 0 || grid_size % 8 != 0 {
        return Err(Error::InvalidArgument(format!(
            "grid size {grid_size} must be a positive multiple of 8"
        )));
    }
    let model = NetworkModel::new(
        (1, grid_size, grid_size),
        two_branch_layers(COARSE_CHANNELS, FINE_CHANNELS),
    )?;
    let n = model.param_count();
    log::info!("reference network: {n} parameters");
    assert!(
        (REFERENCE_PARAM_RANGE.0..=REFERENCE_PARAM_RANGE.1).contains(&n),
        "reference network has {n} parameters"
    );
    Ok(model)
}
