//! Per-channel batch normalization.

use crate::error::{Result, TensorError};
use crate::tensor::{Shape, Tensor};

/// Running-average momentum used when folding batch statistics.
pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

/// Mean and unbiased variance of one training batch, per channel.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl BatchStats {
    /// `running <- (1 - momentum) * running + momentum * batch`.
    pub fn fold_into(&self, running_mean: &mut [f64], running_var: &mut [f64], momentum: f64) {
        for (r, b) in running_mean.iter_mut().zip(&self.mean) {
            *r = (1.0 - momentum) * *r + momentum * b;
        }
        for (r, b) in running_var.iter_mut().zip(&self.var) {
            *r = (1.0 - momentum) * *r + momentum * b;
        }
    }
}

pub(crate) fn check(x: &Tensor, params: &[(&'static str, &Tensor)], eps: f64) -> Result<()> {
    if !(eps > 0.0) {
        return Err(TensorError::InvalidArgument {
            op: "batchnorm",
            msg: format!("eps must be positive, got {eps}"),
        });
    }
    let c = x.shape().channels;
    for (dim, p) in params {
        if p.len() != c {
            return Err(TensorError::ShapeMismatch {
                op: "batchnorm",
                dim,
                expected: c,
                got: p.len(),
            });
        }
    }
    Ok(())
}

fn per_channel(x: &Tensor, mut f: impl FnMut(usize, &[f64])) {
    let s = x.shape();
    for n in 0..s.batch {
        for c in 0..s.channels {
            let start = (n * s.channels + c) * s.plane();
            f(c, &x.data()[start..start + s.plane()]);
        }
    }
}

/// Normalized activations plus what the backward pass needs.
pub(crate) struct NormOutput {
    pub y: Tensor,
    pub xhat: Tensor,
    pub inv_std: Vec<f64>,
    pub stats: Option<BatchStats>,
}

fn affine(x: &Tensor, gamma: &[f64], beta: &[f64], mean: &[f64], inv_std: &[f64]) -> (Tensor, Tensor) {
    let s = x.shape();
    let mut y = Vec::with_capacity(s.volume());
    let mut xhat = Vec::with_capacity(s.volume());
    per_channel(x, |c, plane| {
        for &v in plane {
            let h = (v - mean[c]) * inv_std[c];
            xhat.push(h);
            y.push(gamma[c] * h + beta[c]);
        }
    });
    (
        Tensor::from_op("batchnorm", s, y),
        Tensor::from_op("batchnorm", s, xhat),
    )
}

pub(crate) fn forward_inference(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    running_mean: &Tensor,
    running_var: &Tensor,
    eps: f64,
) -> Result<NormOutput> {
    check(
        x,
        &[
            ("gamma length", gamma),
            ("beta length", beta),
            ("running_mean length", running_mean),
            ("running_var length", running_var),
        ],
        eps,
    )?;
    let inv_std: Vec<f64> = running_var.data().iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
    let (y, xhat) = affine(x, gamma.data(), beta.data(), running_mean.data(), &inv_std);
    Ok(NormOutput {
        y,
        xhat,
        inv_std,
        stats: None,
    })
}

pub(crate) fn forward_train(x: &Tensor, gamma: &Tensor, beta: &Tensor, eps: f64) -> Result<NormOutput> {
    check(x, &[("gamma length", gamma), ("beta length", beta)], eps)?;
    let s = x.shape();
    let count = (s.batch * s.plane()) as f64;
    if count < 1.0 {
        return Err(TensorError::InvalidArgument {
            op: "batchnorm",
            msg: "empty batch".into(),
        });
    }
    let mut mean = vec![0.0; s.channels];
    per_channel(x, |c, plane| mean[c] += plane.iter().sum::<f64>());
    mean.iter_mut().for_each(|m| *m /= count);
    let mut var = vec![0.0; s.channels];
    per_channel(x, |c, plane| {
        var[c] += plane.iter().map(|v| (v - mean[c]).powi(2)).sum::<f64>()
    });
    var.iter_mut().for_each(|v| *v /= count);
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
    let (y, xhat) = affine(x, gamma.data(), beta.data(), &mean, &inv_std);
    let unbiased = if count > 1.0 { count / (count - 1.0) } else { 1.0 };
    Ok(NormOutput {
        y,
        xhat,
        inv_std,
        stats: Some(BatchStats {
            mean,
            var: var.iter().map(|v| v * unbiased).collect(),
        }),
    })
}

/// Returns `(dx, dgamma, dbeta)`.
pub(crate) fn backward(
    grad_out: &Tensor,
    xhat: &Tensor,
    gamma: &Tensor,
    inv_std: &[f64],
    train: bool,
) -> (Tensor, Tensor, Tensor) {
    let s = xhat.shape();
    let cs = s.channels;
    let mut dgamma = vec![0.0; cs];
    let mut dbeta = vec![0.0; cs];
    let plane = s.plane();
    for n in 0..s.batch {
        for c in 0..cs {
            let start = (n * cs + c) * plane;
            let g = &grad_out.data()[start..start + plane];
            let h = &xhat.data()[start..start + plane];
            for (gv, hv) in g.iter().zip(h) {
                dgamma[c] += gv * hv;
                dbeta[c] += gv;
            }
        }
    }
    let count = (s.batch * plane) as f64;
    let mut dx = vec![0.0; s.volume()];
    for n in 0..s.batch {
        for c in 0..cs {
            let start = (n * cs + c) * plane;
            let scale = gamma.data()[c] * inv_std[c];
            for i in start..start + plane {
                let g = grad_out.data()[i];
                dx[i] = if train {
                    scale * (g - dbeta[c] / count - xhat.data()[i] * dgamma[c] / count)
                } else {
                    scale * g
                };
            }
        }
    }
    let ps = Shape::new(1, cs, 1, 1);
    (
        Tensor::from_op("batchnorm_backward", s, dx),
        Tensor::from_op("batchnorm_backward", ps, dgamma),
        Tensor::from_op("batchnorm_backward", ps, dbeta),
    )
}
