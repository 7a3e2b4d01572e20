//! Pure forward kernels. Inputs are borrowed and never mutated.

use crate::conv::{self, ConvSpec};
use crate::error::{Result, TensorError};
use crate::norm::{self, BatchStats};
use crate::resize;
use crate::tensor::{Shape, Tensor};

pub fn conv2d(x: &Tensor, spec: &ConvSpec, weight: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
    conv::conv2d_forward(x, spec, weight, bias)
}

/// Inference-mode batch normalization with fixed running statistics.
pub fn batchnorm(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    running_mean: &Tensor,
    running_var: &Tensor,
    eps: f64,
) -> Result<Tensor> {
    Ok(norm::forward_inference(x, gamma, beta, running_mean, running_var, eps)?.y)
}

/// Training-mode batch normalization. Returns the batch statistics so the
/// caller can fold them into its running averages.
pub fn batchnorm_train(x: &Tensor, gamma: &Tensor, beta: &Tensor, eps: f64) -> Result<(Tensor, BatchStats)> {
    let out = norm::forward_train(x, gamma, beta, eps)?;
    Ok((out.y, out.stats.expect("training stats")))
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map("relu", |v| v.max(0.0))
}

pub fn sigmoid_scalar(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map("sigmoid", sigmoid_scalar)
}

/// `scale * x + shift`, elementwise.
pub fn affine(x: &Tensor, scale: f64, shift: f64) -> Tensor {
    x.map("affine", |v| scale * v + shift)
}

fn check_factor(op: &'static str, factor: usize) -> Result<()> {
    if factor == 2 || factor == 4 {
        Ok(())
    } else {
        Err(TensorError::InvalidArgument {
            op,
            msg: format!("factor must be 2 or 4, got {factor}"),
        })
    }
}

pub fn resize_bilinear(x: &Tensor, height: usize, width: usize) -> Result<Tensor> {
    let s = x.shape();
    if height == 0 || width == 0 || s.height == 0 || s.width == 0 {
        return Err(TensorError::InvalidArgument {
            op: "resize_bilinear",
            msg: format!("cannot resize {:?} to {}x{}", s, height, width),
        });
    }
    Ok(resize::forward(x, height, width))
}

pub fn upsample_bilinear(x: &Tensor, factor: usize) -> Result<Tensor> {
    check_factor("upsample_bilinear", factor)?;
    let s = x.shape();
    resize_bilinear(x, s.height * factor, s.width * factor)
}

pub(crate) fn downsample_shape(s: Shape, factor: usize) -> Result<(usize, usize)> {
    check_factor("downsample", factor)?;
    for (dim, size) in [("height", s.height), ("width", s.width)] {
        if size % factor != 0 || size == 0 {
            return Err(TensorError::Indivisible {
                op: "downsample",
                dim,
                size,
                divisor: factor,
            });
        }
    }
    Ok((s.height / factor, s.width / factor))
}

/// Bilinear resize to `H/factor x W/factor`.
pub fn downsample(x: &Tensor, factor: usize) -> Result<Tensor> {
    let (h, w) = downsample_shape(x.shape(), factor)?;
    resize_bilinear(x, h, w)
}

pub(crate) fn check_same(op: &'static str, a: Shape, b: Shape) -> Result<()> {
    for (dim, x, y) in [
        ("batch", a.batch, b.batch),
        ("channels", a.channels, b.channels),
        ("height", a.height, b.height),
        ("width", a.width, b.width),
    ] {
        if x != y {
            return Err(TensorError::ShapeMismatch {
                op,
                dim,
                expected: x,
                got: y,
            });
        }
    }
    Ok(())
}

fn zip_with(op: &'static str, a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
    check_same(op, a.shape(), b.shape())?;
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Ok(Tensor::from_op(op, a.shape(), data))
}

pub fn elementwise_add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    zip_with("elementwise_add", a, b, |x, y| x + y)
}

pub fn elementwise_mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    zip_with("elementwise_mul", a, b, |x, y| x * y)
}

pub(crate) fn concat_shape(shapes: &[Shape]) -> Result<Shape> {
    let first = *shapes.first().ok_or(TensorError::InvalidArgument {
        op: "concat_channels",
        msg: "no inputs".into(),
    })?;
    let mut channels = 0;
    for s in shapes {
        check_same("concat_channels", first.with_channels(0), s.with_channels(0))?;
        channels += s.channels;
    }
    Ok(first.with_channels(channels))
}

pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
    let shapes: Vec<Shape> = parts.iter().map(|t| t.shape()).collect();
    let out = concat_shape(&shapes)?;
    let mut data = Vec::with_capacity(out.volume());
    for n in 0..out.batch {
        for t in parts {
            let k = t.shape().item();
            data.extend_from_slice(&t.data()[n * k..(n + 1) * k]);
        }
    }
    Ok(Tensor::from_op("concat_channels", out, data))
}

/// Channels `start..start + len` of every batch item.
pub fn narrow_channels(x: &Tensor, start: usize, len: usize) -> Result<Tensor> {
    let s = x.shape();
    if start + len > s.channels || len == 0 {
        return Err(TensorError::ShapeMismatch {
            op: "narrow_channels",
            dim: "channels",
            expected: s.channels,
            got: start + len,
        });
    }
    let out = s.with_channels(len);
    let mut data = Vec::with_capacity(out.volume());
    for n in 0..s.batch {
        let base = n * s.item() + start * s.plane();
        data.extend_from_slice(&x.data()[base..base + len * s.plane()]);
    }
    Ok(Tensor::from_op("narrow_channels", out, data))
}

pub(crate) fn check_split(s: Shape, group_size: usize) -> Result<usize> {
    if group_size == 0 || s.channels % group_size != 0 {
        return Err(TensorError::Indivisible {
            op: "split_channels",
            dim: "channels",
            size: s.channels,
            divisor: group_size,
        });
    }
    Ok(s.channels / group_size)
}

/// Splits into `C / group_size` consecutive groups of `group_size` channels.
pub fn split_channels(x: &Tensor, group_size: usize) -> Result<Vec<Tensor>> {
    let groups = check_split(x.shape(), group_size)?;
    (0..groups)
        .map(|g| narrow_channels(x, g * group_size, group_size))
        .collect()
}

/// Mean over a `k x k` window, stride 1, zero padding `k / 2`; padded cells
/// count toward the divisor.
pub fn mean_pool_same(x: &Tensor, kernel: usize) -> Result<Tensor> {
    if kernel % 2 == 0 || kernel == 0 {
        return Err(TensorError::InvalidArgument {
            op: "mean_pool_same",
            msg: format!("kernel must be odd, got {kernel}"),
        });
    }
    let s = x.shape();
    let r = kernel / 2;
    let (h, w) = (s.height, s.width);
    let norm = 1.0 / (kernel * kernel) as f64;
    let mut out = Vec::with_capacity(s.volume());
    for plane in x.data().chunks(s.plane()) {
        // summed-area table with a zero border row/column
        let mut sat = vec![0.0; (h + 1) * (w + 1)];
        for y in 0..h {
            let mut row = 0.0;
            for xx in 0..w {
                row += plane[y * w + xx];
                sat[(y + 1) * (w + 1) + xx + 1] = sat[y * (w + 1) + xx + 1] + row;
            }
        }
        for y in 0..h {
            let y0 = y.saturating_sub(r);
            let y1 = (y + r + 1).min(h);
            for xx in 0..w {
                let x0 = xx.saturating_sub(r);
                let x1 = (xx + r + 1).min(w);
                let sum = sat[y1 * (w + 1) + x1] - sat[y0 * (w + 1) + x1] - sat[y1 * (w + 1) + x0]
                    + sat[y0 * (w + 1) + x0];
                out.push(sum * norm);
            }
        }
    }
    Ok(Tensor::from_op("mean_pool_same", s, out))
}
