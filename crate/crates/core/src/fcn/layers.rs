//! Layer kernels with hand-written backward passes. Convolutions run as
//! im2col followed by a matrix product.

use std::fmt;

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "sigmoid" => Some(Activation::Sigmoid),
            "none" => Some(Activation::Identity),
            _ => None,
        }
    }

    fn apply(self, z: &mut [f64]) {
        match self {
            Activation::Relu => z.iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Sigmoid => z.iter_mut().for_each(|v| *v = sigmoid(*v)),
            Activation::Identity => {}
        }
    }

    /// Turns d(loss)/d(output) into d(loss)/d(pre-activation), given the output.
    fn backward(self, out: &[f64], grad: &mut [f64]) {
        match self {
            Activation::Relu => grad.iter_mut().zip(out).for_each(|(g, &o)| {
                if o <= 0.0 {
                    *g = 0.0;
                }
            }),
            Activation::Sigmoid => grad
                .iter_mut()
                .zip(out)
                .for_each(|(g, &o)| *g *= o * (1.0 - o)),
            Activation::Identity => {}
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub activation: Activation,
}

impl ConvSpec {
    pub fn weight_len(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel * self.kernel
    }

    pub fn output_size(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        let span = |n: usize| {
            let padded = n + 2 * self.padding;
            (padded >= self.kernel).then(|| (padded - self.kernel) / self.stride + 1)
        };
        Some((span(h)?, span(w)?))
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    pub fn fan_out(&self) -> usize {
        self.out_channels * self.kernel * self.kernel
    }
}

/// One node of the (sequential) network graph. `ConcatInput` appends the
/// network's own input as extra channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv(ConvSpec),
    Upsample { factor: usize },
    ConcatInput,
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv(c) if c.kernel == 1 => "pointwise-conv",
            LayerSpec::Conv(c) if c.stride > 1 => "downsample-conv",
            LayerSpec::Conv(_) => "conv",
            LayerSpec::Upsample { .. } => "upsample",
            LayerSpec::ConcatInput => "concat",
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            LayerSpec::Conv(c) => c.weight_len() + c.out_channels,
            _ => 0,
        }
    }

    /// Output shape for an input of `shape` when the network input is `net_input`.
    pub fn output_shape(
        &self,
        shape: (usize, usize, usize),
        net_input: (usize, usize, usize),
    ) -> Result<(usize, usize, usize)> {
        let (c, h, w) = shape;
        match self {
            LayerSpec::Conv(spec) => {
                if spec.in_channels != c {
                    return Err(Error::ShapeMismatch {
                        expected: format!("{} input channels", spec.in_channels),
                        actual: format!("{c} channels"),
                    });
                }
                let (oh, ow) = spec.output_size(h, w).ok_or_else(|| Error::ShapeMismatch {
                    expected: format!("at least {0}x{0} after padding", spec.kernel),
                    actual: format!("{h}x{w}"),
                })?;
                Ok((spec.out_channels, oh, ow))
            }
            LayerSpec::Upsample { factor } => Ok((c, h * factor, w * factor)),
            LayerSpec::ConcatInput => {
                if (h, w) != (net_input.1, net_input.2) {
                    return Err(Error::ShapeMismatch {
                        expected: format!(
                            "{}x{} to concatenate with the input",
                            net_input.1, net_input.2
                        ),
                        actual: format!("{h}x{w}"),
                    });
                }
                Ok((c + net_input.0, h, w))
            }
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv(c) => write!(
                f,
                "{} kernel={} stride={} padding={} in={} out={} activation={}",
                self.kind(),
                c.kernel,
                c.stride,
                c.padding,
                c.in_channels,
                c.out_channels,
                c.activation.name()
            ),
            LayerSpec::Upsample { factor } => write!(f, "upsample factor={factor}"),
            LayerSpec::ConcatInput => write!(f, "concat"),
        }
    }
}

impl std::str::FromStr for LayerSpec {
    type Err = String;

    fn from_str(line: &str) -> std::result::Result<Self, String> {
        let mut tokens = line.split_whitespace();
        let kind = tokens.next().ok_or("empty layer line")?;
        let mut fields = std::collections::HashMap::new();
        for tok in tokens {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| format!("bad field {tok:?}"))?;
            fields.insert(k, v);
        }
        let num = |k: &str| -> std::result::Result<usize, String> {
            fields
                .get(k)
                .ok_or_else(|| format!("{kind}: missing {k}"))?
                .parse()
                .map_err(|e| format!("{kind}: {k}: {e}"))
        };
        let spec = match kind {
            "conv" | "downsample-conv" | "pointwise-conv" => {
                let act = fields.get("activation").ok_or("conv: missing activation")?;
                LayerSpec::Conv(ConvSpec {
                    in_channels: num("in")?,
                    out_channels: num("out")?,
                    kernel: num("kernel")?,
                    stride: num("stride")?,
                    padding: num("padding")?,
                    activation: Activation::parse(act)
                        .ok_or_else(|| format!("unknown activation {act:?}"))?,
                })
            }
            "upsample" => LayerSpec::Upsample {
                factor: num("factor")?,
            },
            "concat" => LayerSpec::ConcatInput,
            other => return Err(format!("unknown layer kind {other:?}")),
        };
        if spec.kind() != kind {
            return Err(format!(
                "layer declared as {kind} but parameters make it {}",
                spec.kind()
            ));
        }
        if let LayerSpec::Conv(c) = spec {
            if c.kernel == 0 || c.stride == 0 || c.in_channels == 0 || c.out_channels == 0 {
                return Err("conv sizes must be positive".into());
            }
        }
        if let LayerSpec::Upsample { factor: 0 } = spec {
            return Err("upsample factor must be positive".into());
        }
        Ok(spec)
    }
}

/// Lays out the receptive fields of every output pixel as a
/// `(in_channels·k·k) × (out_h·out_w)` matrix.
fn im2col(input: &Tensor, spec: &ConvSpec, oh: usize, ow: usize) -> Vec<f64> {
    let k = spec.kernel;
    let plane = oh * ow;
    let mut cols = vec![0.0; spec.fan_in() * plane];
    for ic in 0..input.channels {
        for ky in 0..k {
            for kx in 0..k {
                let row = (ic * k + ky) * k + kx;
                let dst = &mut cols[row * plane..(row + 1) * plane];
                for oy in 0..oh {
                    let iy = (oy * spec.stride + ky) as i64 - spec.padding as i64;
                    if iy < 0 || iy >= input.height as i64 {
                        continue;
                    }
                    let src = &input.data[(ic * input.height + iy as usize) * input.width..]
                        [..input.width];
                    let out_row = &mut dst[oy * ow..(oy + 1) * ow];
                    for (ox, slot) in out_row.iter_mut().enumerate() {
                        let ix = (ox * spec.stride + kx) as i64 - spec.padding as i64;
                        if ix >= 0 && ix < input.width as i64 {
                            *slot = src[ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im(cols: &[f64], spec: &ConvSpec, oh: usize, ow: usize, h: usize, w: usize) -> Tensor {
    let k = spec.kernel;
    let plane = oh * ow;
    let mut out = Tensor::zeros(spec.in_channels, h, w);
    for ic in 0..spec.in_channels {
        for ky in 0..k {
            for kx in 0..k {
                let row = (ic * k + ky) * k + kx;
                let src = &cols[row * plane..(row + 1) * plane];
                for oy in 0..oh {
                    let iy = (oy * spec.stride + ky) as i64 - spec.padding as i64;
                    if iy < 0 || iy >= h as i64 {
                        continue;
                    }
                    let dst = &mut out.data[(ic * h + iy as usize) * w..][..w];
                    for ox in 0..ow {
                        let ix = (ox * spec.stride + kx) as i64 - spec.padding as i64;
                        if ix >= 0 && ix < w as i64 {
                            dst[ix as usize] += src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
    out
}

/// `c = a·b (+ c if accumulate)` for row-major `a: m×k`, `b: k×n`, with
/// optional transposes expressed through strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_transposed: bool,
    b: &[f64],
    b_transposed: bool,
    c: &mut [f64],
    accumulate: bool,
) {
    let (rsa, csa) = if a_transposed {
        (1, m as isize)
    } else {
        (k as isize, 1)
    };
    let (rsb, csb) = if b_transposed {
        (1, k as isize)
    } else {
        (n as isize, 1)
    };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: slice lengths cover the strided extents checked below.
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Values a convolution keeps for its backward pass.
#[derive(Debug, Clone)]
pub struct ConvCache {
    cols: Vec<f64>,
    input_hw: (usize, usize),
}

pub fn conv_forward(
    input: &Tensor,
    spec: &ConvSpec,
    weights: &[f64],
    bias: &[f64],
) -> (Tensor, ConvCache) {
    let (oh, ow) = spec
        .output_size(input.height, input.width)
        .expect("shapes validated when the model was built");
    let plane = oh * ow;
    let cols = im2col(input, spec, oh, ow);
    let mut out = Tensor::zeros(spec.out_channels, oh, ow);
    for (oc, b) in bias.iter().enumerate() {
        out.data[oc * plane..(oc + 1) * plane].fill(*b);
    }
    gemm(
        spec.out_channels,
        spec.fan_in(),
        plane,
        weights,
        false,
        &cols,
        false,
        &mut out.data,
        true,
    );
    spec.activation.apply(&mut out.data);
    (
        out,
        ConvCache {
            cols,
            input_hw: (input.height, input.width),
        },
    )
}

/// Returns d(input) and accumulates into `grad_w`, `grad_b`. `grad_out` is
/// consumed as scratch.
pub fn conv_backward(
    output: &Tensor,
    mut grad_out: Tensor,
    cache: &ConvCache,
    spec: &ConvSpec,
    weights: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    need_input_grad: bool,
) -> Option<Tensor> {
    spec.activation.backward(&output.data, &mut grad_out.data);
    let plane = output.plane();
    for (oc, gb) in grad_b.iter_mut().enumerate() {
        *gb += grad_out.data[oc * plane..(oc + 1) * plane]
            .iter()
            .sum::<f64>();
    }
    let fan_in = spec.fan_in();
    gemm(
        spec.out_channels,
        plane,
        fan_in,
        &grad_out.data,
        false,
        &cache.cols,
        true,
        grad_w,
        true,
    );
    if !need_input_grad {
        return None;
    }
    let mut grad_cols = vec![0.0; fan_in * plane];
    gemm(
        fan_in,
        spec.out_channels,
        plane,
        weights,
        true,
        &grad_out.data,
        false,
        &mut grad_cols,
        false,
    );
    let (h, w) = cache.input_hw;
    Some(col2im(&grad_cols, spec, output.height, output.width, h, w))
}

/// Source index pair and weight for one output coordinate of a bilinear
/// (half-pixel centred) upsample.
fn upsample_taps(n: usize, factor: usize) -> Vec<(usize, usize, f64)> {
    (0..n * factor)
        .map(|o| {
            let src = ((o as f64 + 0.5) / factor as f64 - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(n - 1);
            let i1 = (i0 + 1).min(n - 1);
            (i0, i1, src - i0 as f64)
        })
        .collect()
}

pub fn upsample_forward(input: &Tensor, factor: usize) -> Tensor {
    let (h, w) = (input.height, input.width);
    let rows = upsample_taps(h, factor);
    let cols = upsample_taps(w, factor);
    let mut out = Tensor::zeros(input.channels, h * factor, w * factor);
    for c in 0..input.channels {
        for (oy, &(y0, y1, ty)) in rows.iter().enumerate() {
            for (ox, &(x0, x1, tx)) in cols.iter().enumerate() {
                let top = input.at(c, y0, x0) * (1.0 - tx) + input.at(c, y0, x1) * tx;
                let bottom = input.at(c, y1, x0) * (1.0 - tx) + input.at(c, y1, x1) * tx;
                out.data[(c * out.height + oy) * out.width + ox] = top * (1.0 - ty) + bottom * ty;
            }
        }
    }
    out
}

pub fn upsample_backward(grad_out: &Tensor, factor: usize, h: usize, w: usize) -> Tensor {
    let rows = upsample_taps(h, factor);
    let cols = upsample_taps(w, factor);
    let mut grad = Tensor::zeros(grad_out.channels, h, w);
    for c in 0..grad_out.channels {
        for (oy, &(y0, y1, ty)) in rows.iter().enumerate() {
            for (ox, &(x0, x1, tx)) in cols.iter().enumerate() {
                let g = grad_out.data[(c * grad_out.height + oy) * grad_out.width + ox];
                let base = c * h;
                grad.data[(base + y0) * w + x0] += g * (1.0 - ty) * (1.0 - tx);
                grad.data[(base + y0) * w + x1] += g * (1.0 - ty) * tx;
                grad.data[(base + y1) * w + x0] += g * ty * (1.0 - tx);
                grad.data[(base + y1) * w + x1] += g * ty * tx;
            }
        }
    }
    grad
}

pub fn concat_forward(x: &Tensor, input: &Tensor) -> Tensor {
    let mut data = Vec::with_capacity(x.data.len() + input.data.len());
    data.extend_from_slice(&x.data);
    data.extend_from_slice(&input.data);
    Tensor {
        channels: x.channels + input.channels,
        height: x.height,
        width: x.width,
        data,
    }
}

/// Gradient w.r.t. the leading (non-input) channels.
pub fn concat_backward(grad_out: &Tensor, leading_channels: usize) -> Tensor {
    let n = leading_channels * grad_out.plane();
    Tensor {
        channels: leading_channels,
        height: grad_out.height,
        width: grad_out.width,
        data: grad_out.data[..n].to_vec(),
    }
}
