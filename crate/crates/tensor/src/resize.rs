//! Bilinear resampling with half-pixel centers (align_corners = false).

use crate::tensor::{Shape, Tensor};

#[derive(Clone, Copy, Debug)]
struct Tap {
    lo: usize,
    hi: usize,
    frac: f64,
}

/// Interpolation taps along one axis, following the half-pixel convention:
/// `src = (dst + 0.5) * in / out - 0.5`, clamped at zero.
fn taps(input: usize, output: usize) -> Vec<Tap> {
    let scale = input as f64 / output as f64;
    (0..output)
        .map(|d| {
            let src = ((d as f64 + 0.5) * scale - 0.5).max(0.0);
            let lo = (src.floor() as usize).min(input - 1);
            let hi = if lo + 1 < input { lo + 1 } else { lo };
            Tap {
                lo,
                hi,
                frac: src - lo as f64,
            }
        })
        .collect()
}

pub(crate) fn forward(x: &Tensor, out_h: usize, out_w: usize) -> Tensor {
    let s = x.shape();
    let out_shape = s.with_spatial(out_h, out_w);
    let ty = taps(s.height, out_h);
    let tx = taps(s.width, out_w);
    let mut out = Vec::with_capacity(out_shape.volume());
    for plane in x.data().chunks(s.plane()) {
        for a in &ty {
            let r0 = &plane[a.lo * s.width..(a.lo + 1) * s.width];
            let r1 = &plane[a.hi * s.width..(a.hi + 1) * s.width];
            for b in &tx {
                let top = r0[b.lo] * (1.0 - b.frac) + r0[b.hi] * b.frac;
                let bottom = r1[b.lo] * (1.0 - b.frac) + r1[b.hi] * b.frac;
                out.push(top * (1.0 - a.frac) + bottom * a.frac);
            }
        }
    }
    Tensor::from_op("resize_bilinear", out_shape, out)
}

/// Adjoint of [`forward`]: scatters output gradients onto the input grid.
pub(crate) fn backward(grad_out: &Tensor, input: Shape) -> Tensor {
    let gs = grad_out.shape();
    let ty = taps(input.height, gs.height);
    let tx = taps(input.width, gs.width);
    let mut dx = vec![0.0; input.volume()];
    for (plane_out, plane_in) in grad_out
        .data()
        .chunks(gs.plane())
        .zip(dx.chunks_mut(input.plane()))
    {
        for (oy, a) in ty.iter().enumerate() {
            for (ox, b) in tx.iter().enumerate() {
                let g = plane_out[oy * gs.width + ox];
                let w = input.width;
                plane_in[a.lo * w + b.lo] += g * (1.0 - a.frac) * (1.0 - b.frac);
                plane_in[a.lo * w + b.hi] += g * (1.0 - a.frac) * b.frac;
                plane_in[a.hi * w + b.lo] += g * a.frac * (1.0 - b.frac);
                plane_in[a.hi * w + b.hi] += g * a.frac * b.frac;
            }
        }
    }
    Tensor::from_op("resize_bilinear_backward", input, dx)
}
