//! Layer kinds and their forward/backward kernels.
//!
//! All layers act on a single sample. Convolutional layers take `[C, H, W]`
//! tensors; `Linear` accepts any tensor whose length matches its input width
//! and returns a vector.

use super::gemm;
use super::tensor::Tensor;

/// Hyperparameters shared by `conv2d` and `conv2d_transpose`.
///
/// Weights are stored `[out, in, k, k]` for `conv2d` and `[in, out, k, k]`
/// for `conv2d_transpose`, so a transpose layer is the exact adjoint of the
/// convolution that shares its weight tensor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub bias: bool,
}

impl ConvSpec {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            bias: false,
        }
    }

    pub fn with_bias(mut self) -> Self {
        self.bias = true;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LayerSpec {
    Conv2d(ConvSpec),
    Conv2dTranspose(ConvSpec),
    /// Per-channel normalization over spatial positions followed by a learned
    /// per-channel scale and shift.
    SpatialNorm { channels: usize, eps: f64 },
    LeakyRelu { slope: f64 },
    Relu,
    Tanh,
    Sigmoid,
    Flatten,
    Linear { inputs: usize, outputs: usize, bias: bool },
}

/// Default epsilon added to the spatial variance.
pub const NORM_EPS: f64 = 1e-6;

/// How a parameter tensor is initialized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ParamInit {
    /// Zero-mean Gaussian, scaled by the network's weight std.
    Gaussian,
    Constant(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamShape {
    pub role: &'static str,
    pub shape: Vec<usize>,
    pub init: ParamInit,
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d(_) => "conv2d",
            LayerSpec::Conv2dTranspose(_) => "conv2d_transpose",
            LayerSpec::SpatialNorm { .. } => "spatial_norm",
            LayerSpec::LeakyRelu { .. } => "leaky_relu",
            LayerSpec::Relu => "relu",
            LayerSpec::Tanh => "tanh",
            LayerSpec::Sigmoid => "sigmoid",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Linear { .. } => "linear",
        }
    }

    /// Checks hyperparameters that do not depend on the input shape.
    pub fn validate(&self) -> Result<(), String> {
        match self {
            LayerSpec::Conv2d(c) | LayerSpec::Conv2dTranspose(c) => {
                if c.kernel == 0 || c.stride == 0 {
                    return Err("kernel size and stride must be at least 1".into());
                }
                if c.in_channels == 0 || c.out_channels == 0 {
                    return Err("channel counts must be positive".into());
                }
                if c.padding >= c.kernel {
                    return Err(format!("padding {} must be smaller than kernel {}", c.padding, c.kernel));
                }
            }
            LayerSpec::SpatialNorm { channels, eps } => {
                if *channels == 0 {
                    return Err("spatial_norm needs at least one channel".into());
                }
                if !(*eps > 0.0 && eps.is_finite()) {
                    return Err(format!("spatial_norm eps must be positive, got {eps}"));
                }
            }
            LayerSpec::LeakyRelu { slope } => {
                if !(*slope > 0.0 && *slope < 1.0) {
                    return Err(format!("leaky_relu slope must lie in (0, 1), got {slope}"));
                }
            }
            LayerSpec::Linear { inputs, outputs, .. } => {
                if *inputs == 0 || *outputs == 0 {
                    return Err("linear widths must be positive".into());
                }
            }
            LayerSpec::Relu | LayerSpec::Tanh | LayerSpec::Sigmoid | LayerSpec::Flatten => {}
        }
        Ok(())
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, String> {
        self.validate()?;
        match self {
            LayerSpec::Conv2d(c) => {
                let (ch, h, w) = chw(input)?;
                if ch != c.in_channels {
                    return Err(format!("expected {} input channels, got {ch}", c.in_channels));
                }
                let ho = conv_out(h, c)?;
                let wo = conv_out(w, c)?;
                Ok(vec![c.out_channels, ho, wo])
            }
            LayerSpec::Conv2dTranspose(c) => {
                let (ch, h, w) = chw(input)?;
                if ch != c.in_channels {
                    return Err(format!("expected {} input channels, got {ch}", c.in_channels));
                }
                let ho = conv_transpose_out(h, c)?;
                let wo = conv_transpose_out(w, c)?;
                Ok(vec![c.out_channels, ho, wo])
            }
            LayerSpec::SpatialNorm { channels, .. } => {
                let (ch, h, w) = chw(input)?;
                if ch != *channels {
                    return Err(format!("expected {channels} channels, got {ch}"));
                }
                if h * w < 2 {
                    return Err("spatial_norm needs at least two spatial positions".into());
                }
                Ok(input.to_vec())
            }
            LayerSpec::LeakyRelu { .. } | LayerSpec::Relu | LayerSpec::Tanh | LayerSpec::Sigmoid => {
                Ok(input.to_vec())
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Linear { inputs, outputs, .. } => {
                let len: usize = input.iter().product();
                if len != *inputs {
                    return Err(format!("expected {inputs} inputs, got {len}"));
                }
                Ok(vec![*outputs])
            }
        }
    }

    pub fn param_shapes(&self) -> Vec<ParamShape> {
        let gaussian = |role, shape| ParamShape {
            role,
            shape,
            init: ParamInit::Gaussian,
        };
        let constant = |role, shape, v| ParamShape {
            role,
            shape,
            init: ParamInit::Constant(v),
        };
        match self {
            LayerSpec::Conv2d(c) => {
                let mut v = vec![gaussian("weight", vec![c.out_channels, c.in_channels, c.kernel, c.kernel])];
                if c.bias {
                    v.push(constant("bias", vec![c.out_channels], 0.0));
                }
                v
            }
            LayerSpec::Conv2dTranspose(c) => {
                let mut v = vec![gaussian("weight", vec![c.in_channels, c.out_channels, c.kernel, c.kernel])];
                if c.bias {
                    v.push(constant("bias", vec![c.out_channels], 0.0));
                }
                v
            }
            LayerSpec::SpatialNorm { channels, .. } => vec![
                constant("scale", vec![*channels], 1.0),
                constant("shift", vec![*channels], 0.0),
            ],
            LayerSpec::Linear { inputs, outputs, bias } => {
                let mut v = vec![gaussian("weight", vec![*outputs, *inputs])];
                if *bias {
                    v.push(constant("bias", vec![*outputs], 0.0));
                }
                v
            }
            _ => Vec::new(),
        }
    }

    /// Forward kernel. `input` and `params` are assumed to be shape-checked
    /// by the owning network and `out_shape` is this layer's output shape.
    pub(crate) fn forward(&self, params: &[Tensor], input: &Tensor, out_shape: &[usize]) -> Tensor {
        match self {
            LayerSpec::Conv2d(c) => conv2d_forward(c, params, input, out_shape),
            LayerSpec::Conv2dTranspose(c) => conv_transpose_forward(c, params, input, out_shape),
            LayerSpec::SpatialNorm { eps, .. } => spatial_norm_forward(*eps, params, input),
            LayerSpec::LeakyRelu { slope } => input.map(|v| if v > 0.0 { v } else { slope * v }),
            LayerSpec::Relu => input.map(|v| v.max(0.0)),
            LayerSpec::Tanh => input.map(f64::tanh),
            LayerSpec::Sigmoid => input.map(sigmoid),
            LayerSpec::Flatten => Tensor::vector(input.data().to_vec()),
            LayerSpec::Linear { inputs, outputs, bias } => {
                let mut y = vec![0.0; *outputs];
                gemm::ab(*outputs, *inputs, 1, params[0].data(), input.data(), &mut y, false);
                if *bias {
                    for (v, b) in y.iter_mut().zip(params[1].data()) {
                        *v += b;
                    }
                }
                Tensor::vector(y)
            }
        }
    }

    /// Backward kernel: returns parameter gradients (in `param_shapes` order)
    /// and the gradient with respect to `input`.
    pub(crate) fn backward(
        &self,
        params: &[Tensor],
        input: &Tensor,
        output: &Tensor,
        grad_out: &Tensor,
    ) -> (Vec<Tensor>, Tensor) {
        match self {
            LayerSpec::Conv2d(c) => conv2d_backward(c, params, input, grad_out),
            LayerSpec::Conv2dTranspose(c) => conv_transpose_backward(c, params, input, grad_out),
            LayerSpec::SpatialNorm { eps, .. } => spatial_norm_backward(*eps, params, input, grad_out),
            LayerSpec::LeakyRelu { slope } => {
                let g = input
                    .zip_map(grad_out, |x, g| if x > 0.0 { g } else { slope * g })
                    .expect("shape checked");
                (Vec::new(), g)
            }
            LayerSpec::Relu => {
                let g = input
                    .zip_map(grad_out, |x, g| if x > 0.0 { g } else { 0.0 })
                    .expect("shape checked");
                (Vec::new(), g)
            }
            LayerSpec::Tanh => {
                let g = output.zip_map(grad_out, |y, g| g * (1.0 - y * y)).expect("shape checked");
                (Vec::new(), g)
            }
            LayerSpec::Sigmoid => {
                let g = output.zip_map(grad_out, |y, g| g * y * (1.0 - y)).expect("shape checked");
                (Vec::new(), g)
            }
            LayerSpec::Flatten => {
                let g = Tensor::new(input.shape().to_vec(), grad_out.data().to_vec()).expect("same length");
                (Vec::new(), g)
            }
            LayerSpec::Linear { inputs, outputs, bias } => {
                let mut dw = vec![0.0; outputs * inputs];
                gemm::ab(*outputs, 1, *inputs, grad_out.data(), input.data(), &mut dw, false);
                let mut dx = vec![0.0; *inputs];
                gemm::atb(*inputs, *outputs, 1, params[0].data(), grad_out.data(), &mut dx, false);
                let mut grads = vec![Tensor::new(vec![*outputs, *inputs], dw).expect("sized")];
                if *bias {
                    grads.push(grad_out.clone());
                }
                let dx = Tensor::new(input.shape().to_vec(), dx).expect("sized");
                (grads, dx)
            }
        }
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn chw(shape: &[usize]) -> Result<(usize, usize, usize), String> {
    match shape {
        [c, h, w] => Ok((*c, *h, *w)),
        _ => Err(format!("expected a [C, H, W] input, got {shape:?}")),
    }
}

fn conv_out(size: usize, c: &ConvSpec) -> Result<usize, String> {
    let padded = size + 2 * c.padding;
    if padded < c.kernel {
        return Err(format!(
            "input extent {size} with padding {} is smaller than kernel {}",
            c.padding, c.kernel
        ));
    }
    Ok((padded - c.kernel) / c.stride + 1)
}

fn conv_transpose_out(size: usize, c: &ConvSpec) -> Result<usize, String> {
    let full = (size - 1) * c.stride + c.kernel;
    if full <= 2 * c.padding {
        return Err(format!("transposed output for extent {size} would be empty"));
    }
    Ok(full - 2 * c.padding)
}

/// Geometry of a convolution from a `[c, h, w]` image to `ho × wo` outputs.
#[derive(Clone, Copy, Debug)]
struct Geom {
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    s: usize,
    p: usize,
    ho: usize,
    wo: usize,
}

impl Geom {
    fn rows(&self) -> usize {
        self.c * self.k * self.k
    }

    fn cols(&self) -> usize {
        self.ho * self.wo
    }
}

fn im2col(x: &[f64], g: &Geom, cols: &mut [f64]) {
    let n = g.cols();
    for c in 0..g.c {
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = (c * g.k + ki) * g.k + kj;
                let dst = &mut cols[row * n..(row + 1) * n];
                for oy in 0..g.ho {
                    let iy = (oy * g.s + ki) as isize - g.p as isize;
                    let line = &mut dst[oy * g.wo..(oy + 1) * g.wo];
                    if iy < 0 || iy as usize >= g.h {
                        line.iter_mut().for_each(|v| *v = 0.0);
                        continue;
                    }
                    let src = &x[(c * g.h + iy as usize) * g.w..(c * g.h + iy as usize + 1) * g.w];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = (ox * g.s + kj) as isize - g.p as isize;
                        *v = if ix < 0 || ix as usize >= g.w { 0.0 } else { src[ix as usize] };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters-and-adds columns back into `x`.
fn col2im(cols: &[f64], g: &Geom, x: &mut [f64]) {
    let n = g.cols();
    for c in 0..g.c {
        for ki in 0..g.k {
            for kj in 0..g.k {
                let row = (c * g.k + ki) * g.k + kj;
                let src = &cols[row * n..(row + 1) * n];
                for oy in 0..g.ho {
                    let iy = (oy * g.s + ki) as isize - g.p as isize;
                    if iy < 0 || iy as usize >= g.h {
                        continue;
                    }
                    let base = (c * g.h + iy as usize) * g.w;
                    let line = &src[oy * g.wo..(oy + 1) * g.wo];
                    for (ox, v) in line.iter().enumerate() {
                        let ix = (ox * g.s + kj) as isize - g.p as isize;
                        if ix >= 0 && (ix as usize) < g.w {
                            x[base + ix as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

fn add_channel_bias(out: &mut [f64], bias: &[f64], plane: usize) {
    for (chunk, b) in out.chunks_mut(plane).zip(bias) {
        chunk.iter_mut().for_each(|v| *v += b);
    }
}

fn channel_sums(grad: &[f64], channels: usize, plane: usize) -> Tensor {
    Tensor::vector(
        grad.chunks(plane)
            .take(channels)
            .map(|c| c.iter().sum())
            .collect(),
    )
}

fn conv_geom(c: &ConvSpec, input: &[usize], out_shape: &[usize]) -> Geom {
    Geom {
        c: c.in_channels,
        h: input[1],
        w: input[2],
        k: c.kernel,
        s: c.stride,
        p: c.padding,
        ho: out_shape[1],
        wo: out_shape[2],
    }
}

/// Geometry of the convolution that a transpose layer is the adjoint of: it
/// maps the transpose's output back to the transpose's input.
fn transpose_geom(c: &ConvSpec, input: &[usize], out_shape: &[usize]) -> Geom {
    Geom {
        c: c.out_channels,
        h: out_shape[1],
        w: out_shape[2],
        k: c.kernel,
        s: c.stride,
        p: c.padding,
        ho: input[1],
        wo: input[2],
    }
}

fn conv2d_forward(c: &ConvSpec, params: &[Tensor], input: &Tensor, out_shape: &[usize]) -> Tensor {
    let g = conv_geom(c, input.shape(), out_shape);
    let mut cols = vec![0.0; g.rows() * g.cols()];
    im2col(input.data(), &g, &mut cols);
    let mut out = vec![0.0; c.out_channels * g.cols()];
    gemm::ab(c.out_channels, g.rows(), g.cols(), params[0].data(), &cols, &mut out, false);
    if c.bias {
        add_channel_bias(&mut out, params[1].data(), g.cols());
    }
    Tensor::new(out_shape.to_vec(), out).expect("sized")
}

fn conv2d_backward(c: &ConvSpec, params: &[Tensor], input: &Tensor, grad_out: &Tensor) -> (Vec<Tensor>, Tensor) {
    let g = conv_geom(c, input.shape(), grad_out.shape());
    let mut cols = vec![0.0; g.rows() * g.cols()];
    im2col(input.data(), &g, &mut cols);

    let mut dw = vec![0.0; c.out_channels * g.rows()];
    gemm::abt(c.out_channels, g.cols(), g.rows(), grad_out.data(), &cols, &mut dw, false);

    let mut dcols = cols;
    gemm::atb(g.rows(), c.out_channels, g.cols(), params[0].data(), grad_out.data(), &mut dcols, false);
    let mut dx = vec![0.0; input.len()];
    col2im(&dcols, &g, &mut dx);

    let mut grads = vec![Tensor::new(params[0].shape().to_vec(), dw).expect("sized")];
    if c.bias {
        grads.push(channel_sums(grad_out.data(), c.out_channels, g.cols()));
    }
    (grads, Tensor::new(input.shape().to_vec(), dx).expect("sized"))
}

fn conv_transpose_forward(c: &ConvSpec, params: &[Tensor], input: &Tensor, out_shape: &[usize]) -> Tensor {
    let g = transpose_geom(c, input.shape(), out_shape);
    let hw = g.cols();
    let mut cols = vec![0.0; g.rows() * hw];
    gemm::atb(g.rows(), c.in_channels, hw, params[0].data(), input.data(), &mut cols, false);
    let mut out = vec![0.0; out_shape.iter().product()];
    col2im(&cols, &g, &mut out);
    if c.bias {
        add_channel_bias(&mut out, params[1].data(), g.h * g.w);
    }
    Tensor::new(out_shape.to_vec(), out).expect("sized")
}

fn conv_transpose_backward(
    c: &ConvSpec,
    params: &[Tensor],
    input: &Tensor,
    grad_out: &Tensor,
) -> (Vec<Tensor>, Tensor) {
    let g = transpose_geom(c, input.shape(), grad_out.shape());
    let hw = g.cols();
    let mut dcols = vec![0.0; g.rows() * hw];
    im2col(grad_out.data(), &g, &mut dcols);

    let mut dx = vec![0.0; input.len()];
    gemm::ab(c.in_channels, g.rows(), hw, params[0].data(), &dcols, &mut dx, false);
    let mut dw = vec![0.0; c.in_channels * g.rows()];
    gemm::abt(c.in_channels, hw, g.rows(), input.data(), &dcols, &mut dw, false);

    let mut grads = vec![Tensor::new(params[0].shape().to_vec(), dw).expect("sized")];
    if c.bias {
        grads.push(channel_sums(grad_out.data(), c.out_channels, g.h * g.w));
    }
    (grads, Tensor::new(input.shape().to_vec(), dx).expect("sized"))
}

/// Per-channel mean and inverse standard deviation over spatial positions.
fn channel_stats(x: &[f64], channels: usize, eps: f64) -> Vec<(f64, f64)> {
    let plane = x.len() / channels;
    x.chunks(plane)
        .map(|c| {
            let n = plane as f64;
            let mean = c.iter().sum::<f64>() / n;
            let var = c.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            (mean, 1.0 / (var + eps).sqrt())
        })
        .collect()
}

/// The normalized activation before the affine rescale.
pub fn spatial_normalize(input: &Tensor, eps: f64) -> Tensor {
    let channels = input.shape()[0];
    let plane = input.len() / channels;
    let stats = channel_stats(input.data(), channels, eps);
    Tensor::from_fn(input.shape(), |i| {
        let (mean, inv) = stats[i / plane];
        (input.data()[i] - mean) * inv
    })
}

fn spatial_norm_forward(eps: f64, params: &[Tensor], input: &Tensor) -> Tensor {
    let plane = input.len() / input.shape()[0];
    let mut y = spatial_normalize(input, eps);
    let (scale, shift) = (params[0].data(), params[1].data());
    for (c, chunk) in y.data_mut().chunks_mut(plane).enumerate() {
        chunk.iter_mut().for_each(|v| *v = *v * scale[c] + shift[c]);
    }
    y
}

fn spatial_norm_backward(eps: f64, params: &[Tensor], input: &Tensor, grad_out: &Tensor) -> (Vec<Tensor>, Tensor) {
    let channels = input.shape()[0];
    let plane = input.len() / channels;
    let n = plane as f64;
    let stats = channel_stats(input.data(), channels, eps);
    let scale = params[0].data();
    let mut dscale = vec![0.0; channels];
    let mut dshift = vec![0.0; channels];
    let mut dx = vec![0.0; input.len()];
    for c in 0..channels {
        let (mean, inv) = stats[c];
        let range = c * plane..(c + 1) * plane;
        let x = &input.data()[range.clone()];
        let dy = &grad_out.data()[range.clone()];
        let mut sum_g = 0.0;
        let mut sum_gx = 0.0;
        for (&xv, &g) in x.iter().zip(dy) {
            let xhat = (xv - mean) * inv;
            dshift[c] += g;
            dscale[c] += g * xhat;
            sum_g += g * scale[c];
            sum_gx += g * scale[c] * xhat;
        }
        let (mean_g, mean_gx) = (sum_g / n, sum_gx / n);
        for ((d, &xv), &g) in dx[range].iter_mut().zip(x).zip(dy) {
            let xhat = (xv - mean) * inv;
            *d = inv * (g * scale[c] - mean_g - xhat * mean_gx);
        }
    }
    (
        vec![Tensor::vector(dscale), Tensor::vector(dshift)],
        Tensor::new(input.shape().to_vec(), dx).expect("sized"),
    )
}
