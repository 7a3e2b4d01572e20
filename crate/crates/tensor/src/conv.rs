//! 2-D convolution via im2col and a dense matrix product.

use rayon::prelude::*;

use crate::error::{Result, TensorError};
use crate::tensor::{Shape, Tensor};

/// Geometry of a convolution layer. Kernels may be non-square.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub dilation: usize,
    pub stride: usize,
    pub pad_h: usize,
    pub pad_w: usize,
    pub has_batchnorm: bool,
}

impl ConvSpec {
    /// Stride 1, dilation 1, "same" padding, no batchnorm.
    pub fn new(in_channels: usize, out_channels: usize, kernel_h: usize, kernel_w: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel_h,
            kernel_w,
            dilation: 1,
            stride: 1,
            pad_h: (kernel_h - 1) / 2,
            pad_w: (kernel_w - 1) / 2,
            has_batchnorm: false,
        }
    }

    pub fn square(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self::new(in_channels, out_channels, kernel, kernel)
    }

    /// Sets the dilation and re-derives "same" padding for odd kernels.
    pub fn dilated(mut self, dilation: usize) -> Self {
        self.dilation = dilation;
        self.pad_h = dilation * (self.kernel_h - 1) / 2;
        self.pad_w = dilation * (self.kernel_w - 1) / 2;
        self
    }

    pub fn strided(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn padded(mut self, pad_h: usize, pad_w: usize) -> Self {
        self.pad_h = pad_h;
        self.pad_w = pad_w;
        self
    }

    pub fn with_batchnorm(mut self) -> Self {
        self.has_batchnorm = true;
        self
    }

    pub fn weight_shape(&self) -> Shape {
        Shape::new(
            self.out_channels,
            self.in_channels,
            self.kernel_h,
            self.kernel_w,
        )
    }

    /// Number of inputs feeding one output unit.
    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| {
            Err(TensorError::InvalidArgument {
                op: "conv2d",
                msg: msg.to_string(),
            })
        };
        if self.dilation == 0 {
            return bad("dilation must be >= 1");
        }
        if self.stride == 0 {
            return bad("stride must be >= 1");
        }
        if self.kernel_h == 0 || self.kernel_w == 0 {
            return bad("kernel extent must be >= 1");
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return bad("channel counts must be >= 1");
        }
        Ok(())
    }

    fn out_extent(&self, size: usize, kernel: usize, pad: usize, dim: &'static str) -> Result<usize> {
        let span = self.dilation * (kernel - 1) + 1;
        let padded = size + 2 * pad;
        if padded < span {
            return Err(TensorError::ShapeMismatch {
                op: "conv2d",
                dim,
                expected: span,
                got: padded,
            });
        }
        Ok((padded - span) / self.stride + 1)
    }

    /// Output shape for an input of shape `x`.
    pub fn output_shape(&self, x: Shape) -> Result<Shape> {
        self.validate()?;
        if x.channels != self.in_channels {
            return Err(TensorError::ShapeMismatch {
                op: "conv2d",
                dim: "channels",
                expected: self.in_channels,
                got: x.channels,
            });
        }
        let h = self.out_extent(x.height, self.kernel_h, self.pad_h, "height")?;
        let w = self.out_extent(x.width, self.kernel_w, self.pad_w, "width")?;
        Ok(Shape::new(x.batch, self.out_channels, h, w))
    }

    fn is_pointwise(&self) -> bool {
        self.kernel_h == 1 && self.kernel_w == 1 && self.stride == 1 && self.pad_h == 0 && self.pad_w == 0
    }
}

pub(crate) fn check_params(spec: &ConvSpec, weight: &Tensor, bias: Option<&Tensor>) -> Result<()> {
    let ws = weight.shape();
    let expected = spec.weight_shape();
    for (dim, e, g) in [
        ("weight out_channels", expected.batch, ws.batch),
        ("weight in_channels", expected.channels, ws.channels),
        ("weight kernel_h", expected.height, ws.height),
        ("weight kernel_w", expected.width, ws.width),
    ] {
        if e != g {
            return Err(TensorError::ShapeMismatch {
                op: "conv2d",
                dim,
                expected: e,
                got: g,
            });
        }
    }
    if let Some(b) = bias {
        if b.len() != spec.out_channels {
            return Err(TensorError::ShapeMismatch {
                op: "conv2d",
                dim: "bias length",
                expected: spec.out_channels,
                got: b.len(),
            });
        }
    }
    Ok(())
}

/// Unrolls one CxHxW image into a `(C*kh*kw) x (Ho*Wo)` column matrix.
fn im2col(spec: &ConvSpec, image: &[f64], h: usize, w: usize, ho: usize, wo: usize, cols: &mut [f64]) {
    let p = ho * wo;
    let (kh, kw, d, s) = (spec.kernel_h, spec.kernel_w, spec.dilation, spec.stride);
    for ci in 0..spec.in_channels {
        let plane = &image[ci * h * w..(ci + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = (ci * kh + ky) * kw + kx;
                let dst = &mut cols[row * p..(row + 1) * p];
                for oy in 0..ho {
                    let iy = (oy * s + ky * d) as isize - spec.pad_h as isize;
                    let out_row = &mut dst[oy * wo..(oy + 1) * wo];
                    if iy < 0 || iy >= h as isize {
                        out_row.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, o) in out_row.iter_mut().enumerate() {
                        let ix = (ox * s + kx * d) as isize - spec.pad_w as isize;
                        *o = if ix < 0 || ix >= w as isize {
                            0.0
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters column gradients back onto the image.
fn col2im(spec: &ConvSpec, cols: &[f64], h: usize, w: usize, ho: usize, wo: usize, image: &mut [f64]) {
    let p = ho * wo;
    let (kh, kw, d, s) = (spec.kernel_h, spec.kernel_w, spec.dilation, spec.stride);
    for ci in 0..spec.in_channels {
        let plane = &mut image[ci * h * w..(ci + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = (ci * kh + ky) * kw + kx;
                let src = &cols[row * p..(row + 1) * p];
                for oy in 0..ho {
                    let iy = (oy * s + ky * d) as isize - spec.pad_h as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                    for ox in 0..wo {
                        let ix = (ox * s + kx * d) as isize - spec.pad_w as isize;
                        if ix >= 0 && ix < w as isize {
                            dst[ix as usize] += src[oy * wo + ox];
                        }
                    }
                }
            }
        }
    }
}

/// `c (m x n) = alpha * a (m x k) * b (k x n) + beta * c`, with explicit
/// row/column strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (isize, isize),
    b: &[f64],
    (rsb, csb): (isize, isize),
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the slices cover every (row, col) addressed by the strides;
    // callers pass dense buffers sized m*k, k*n and m*n.
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

pub(crate) fn conv2d_forward(x: &Tensor, spec: &ConvSpec, weight: &Tensor, bias: Option<&Tensor>) -> Result<Tensor> {
    let out_shape = spec.output_shape(x.shape())?;
    check_params(spec, weight, bias)?;
    let xs = x.shape();
    let (ho, wo) = (out_shape.height, out_shape.width);
    let p = ho * wo;
    let k = spec.fan_in();
    let cout = spec.out_channels;
    let mut out = vec![0.0; out_shape.volume()];
    out.par_chunks_mut(cout * p)
        .zip(x.data().par_chunks(xs.item()))
        .for_each(|(dst, img)| {
            if let Some(b) = bias {
                for (co, chunk) in dst.chunks_mut(p).enumerate() {
                    chunk.fill(b.data()[co]);
                }
            }
            let beta = if bias.is_some() { 1.0 } else { 0.0 };
            if spec.is_pointwise() {
                gemm(cout, k, p, weight.data(), (k as isize, 1), img, (p as isize, 1), beta, dst);
            } else {
                let mut cols = vec![0.0; k * p];
                im2col(spec, img, xs.height, xs.width, ho, wo, &mut cols);
                gemm(cout, k, p, weight.data(), (k as isize, 1), &cols, (p as isize, 1), beta, dst);
            }
        });
    Ok(Tensor::from_op("conv2d", out_shape, out))
}

pub(crate) struct ConvGrads {
    pub input: Option<Tensor>,
    pub weight: Option<Tensor>,
    pub bias: Option<Tensor>,
}

/// Gradients of a convolution. Per-image weight partials are reduced in batch
/// order, so the result does not depend on thread scheduling.
pub(crate) fn conv2d_backward(
    x: &Tensor,
    spec: &ConvSpec,
    weight: &Tensor,
    grad_out: &Tensor,
    need_input: bool,
    need_weight: bool,
    need_bias: bool,
) -> ConvGrads {
    let xs = x.shape();
    let gs = grad_out.shape();
    let (ho, wo) = (gs.height, gs.width);
    let p = ho * wo;
    let k = spec.fan_in();
    let cout = spec.out_channels;
    let pointwise = spec.is_pointwise();

    let per_image: Vec<(Option<Vec<f64>>, Option<Vec<f64>>)> = x
        .data()
        .par_chunks(xs.item())
        .zip(grad_out.data().par_chunks(cout * p))
        .map(|(img, gout)| {
            let cols_owned;
            let cols: &[f64] = if pointwise {
                img
            } else if need_weight {
                let mut c = vec![0.0; k * p];
                im2col(spec, img, xs.height, xs.width, ho, wo, &mut c);
                cols_owned = c;
                &cols_owned
            } else {
                &[]
            };
            let dw = need_weight.then(|| {
                let mut dw = vec![0.0; cout * k];
                // dW (cout x k) = gout (cout x p) * cols^T (p x k)
                gemm(cout, p, k, gout, (p as isize, 1), cols, (1, p as isize), 0.0, &mut dw);
                dw
            });
            let dx = need_input.then(|| {
                let mut dcols = vec![0.0; k * p];
                // dcols (k x p) = W^T (k x cout) * gout (cout x p)
                gemm(k, cout, p, weight.data(), (1, k as isize), gout, (p as isize, 1), 0.0, &mut dcols);
                if pointwise {
                    dcols
                } else {
                    let mut dx = vec![0.0; xs.item()];
                    col2im(spec, &dcols, xs.height, xs.width, ho, wo, &mut dx);
                    dx
                }
            });
            (dx, dw)
        })
        .collect();

    let input = need_input.then(|| {
        let mut data = Vec::with_capacity(xs.volume());
        for (dx, _) in &per_image {
            data.extend_from_slice(dx.as_ref().expect("input grad computed"));
        }
        Tensor::from_op("conv2d_backward", xs, data)
    });
    let weight_grad = need_weight.then(|| {
        let mut acc = vec![0.0; cout * k];
        for (_, dw) in &per_image {
            for (a, v) in acc.iter_mut().zip(dw.as_ref().expect("weight grad computed")) {
                *a += v;
            }
        }
        Tensor::from_op("conv2d_backward", spec.weight_shape(), acc)
    });
    let bias_grad = need_bias.then(|| {
        let mut acc = vec![0.0; cout];
        for item in grad_out.data().chunks(cout * p) {
            for (co, plane) in item.chunks(p).enumerate() {
                acc[co] += plane.iter().sum::<f64>();
            }
        }
        Tensor::from_op("conv2d_backward", Shape::new(1, cout, 1, 1), acc)
    });
    ConvGrads {
        input,
        weight: weight_grad,
        bias: bias_grad,
    }
}
