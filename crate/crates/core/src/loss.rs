//! Boundary-weighted BCE and IoU losses with deep supervision.
//!
//! Both losses are normalized per image by the weight mass and averaged over
//! the batch. The weight map emphasises pixels whose 31x31 neighbourhood is
//! mixed: `w = 1 + 5 * |meanpool31(G) - G|`.

use std::sync::Arc;

use sinet_tensor::ops::{self, sigmoid_scalar};
use sinet_tensor::{Backward, Shape, Tape, Tensor, TensorError, Var};

use crate::error::{CoreError, Result};
use crate::sinet::SideVars;

pub const WEIGHT_WINDOW: usize = 31;
pub const WEIGHT_GAIN: f64 = 5.0;

pub fn weight_map(mask: &Tensor) -> Result<Tensor> {
    let pooled = ops::mean_pool_same(mask, WEIGHT_WINDOW)?;
    let data = pooled
        .data()
        .iter()
        .zip(mask.data())
        .map(|(p, g)| 1.0 + WEIGHT_GAIN * (p - g).abs())
        .collect();
    Ok(Tensor::new(mask.shape(), data)?)
}

fn check_inputs(op: &str, logits: Shape, mask: &Tensor, weights: &Tensor) -> Result<()> {
    for (what, s) in [("mask", mask.shape()), ("weights", weights.shape())] {
        if s != logits {
            return Err(CoreError::Data(format!(
                "{op}: {what} shape {s:?} does not match logits {logits:?}"
            )));
        }
    }
    if logits.channels != 1 {
        return Err(TensorError::ShapeMismatch {
            op: "loss",
            dim: "channels",
            expected: 1,
            got: logits.channels,
        }
        .into());
    }
    if mask.data().iter().any(|&g| g != 0.0 && g != 1.0) {
        return Err(CoreError::Data(format!("{op}: ground truth must be binary")));
    }
    if weights.data().iter().any(|&w| w <= 0.0) {
        return Err(CoreError::Data(format!("{op}: weights must be positive")));
    }
    Ok(())
}

/// Numerically stable `BCE(sigmoid(x), g)`.
fn bce_with_logits(x: f64, g: f64) -> f64 {
    x.max(0.0) - x * g + (-x.abs()).exp().ln_1p()
}

struct Items<'a> {
    logits: &'a [f64],
    mask: &'a [f64],
    weights: &'a [f64],
}

fn items<'a>(plane: usize, logits: &'a Tensor, mask: &'a Tensor, weights: &'a Tensor) -> impl Iterator<Item = Items<'a>> {
    logits
        .data()
        .chunks(plane)
        .zip(mask.data().chunks(plane))
        .zip(weights.data().chunks(plane))
        .map(|((logits, mask), weights)| Items { logits, mask, weights })
}

fn bce_value(it: &Items<'_>) -> f64 {
    let total: f64 = it.weights.iter().sum();
    let s: f64 = it
        .logits
        .iter()
        .zip(it.mask)
        .zip(it.weights)
        .map(|((&x, &g), &w)| w * bce_with_logits(x, g))
        .sum();
    s / total
}

/// `(intersection, union)` weighted sums.
fn iou_terms(it: &Items<'_>) -> (f64, f64) {
    let mut inter = 0.0;
    let mut union = 0.0;
    for ((&x, &g), &w) in it.logits.iter().zip(it.mask).zip(it.weights) {
        let p = sigmoid_scalar(x);
        inter += w * p * g;
        union += w * (p + g - p * g);
    }
    (inter, union)
}

fn iou_value(inter: f64, union: f64) -> f64 {
    if union > 0.0 {
        1.0 - inter / union
    } else {
        0.0
    }
}

struct WeightedBce {
    mask: Arc<Tensor>,
    weights: Arc<Tensor>,
}

impl Backward for WeightedBce {
    fn backward(&self, grad_out: &Tensor, inputs: &[&Tensor], _output: &Tensor) -> Vec<Option<Tensor>> {
        let logits = inputs[0];
        let s = logits.shape();
        let scale = grad_out.data()[0] / s.batch as f64;
        let mut grad = Vec::with_capacity(s.volume());
        for it in items(s.plane(), logits, &self.mask, &self.weights) {
            let total: f64 = it.weights.iter().sum();
            for ((&x, &g), &w) in it.logits.iter().zip(it.mask).zip(it.weights) {
                grad.push(scale * w * (sigmoid_scalar(x) - g) / total);
            }
        }
        vec![Some(Tensor::new(s, grad).expect("finite bce gradient"))]
    }
}

struct WeightedIou {
    mask: Arc<Tensor>,
    weights: Arc<Tensor>,
}

impl Backward for WeightedIou {
    fn backward(&self, grad_out: &Tensor, inputs: &[&Tensor], _output: &Tensor) -> Vec<Option<Tensor>> {
        let logits = inputs[0];
        let s = logits.shape();
        let scale = grad_out.data()[0] / s.batch as f64;
        let mut grad = Vec::with_capacity(s.volume());
        for it in items(s.plane(), logits, &self.mask, &self.weights) {
            let (inter, union) = iou_terms(&it);
            for ((&x, &g), &w) in it.logits.iter().zip(it.mask).zip(it.weights) {
                if union <= 0.0 {
                    grad.push(0.0);
                    continue;
                }
                let p = sigmoid_scalar(x);
                // d(I/U)/dp = w * (g * U - I * (1 - g)) / U^2
                let dratio = w * (g * union - inter * (1.0 - g)) / (union * union);
                grad.push(-scale * dratio * p * (1.0 - p));
            }
        }
        vec![Some(Tensor::new(s, grad).expect("finite iou gradient"))]
    }
}

/// Weighted BCE on logits, recorded on the tape.
pub fn weighted_bce(tape: &mut Tape, logits: Var, mask: &Arc<Tensor>, weights: &Arc<Tensor>) -> Result<Var> {
    let lv = tape.value(logits);
    check_inputs("weighted_bce", lv.shape(), mask, weights)?;
    let s = lv.shape();
    let mean = items(s.plane(), lv, mask, weights).map(|it| bce_value(&it)).sum::<f64>() / s.batch as f64;
    let rule = WeightedBce {
        mask: Arc::clone(mask),
        weights: Arc::clone(weights),
    };
    Ok(tape.custom(&[logits], Tensor::scalar(mean), Box::new(rule)))
}

/// Weighted IoU loss `1 - sum(w p g) / sum(w (p + g - p g))` on logits.
pub fn weighted_iou(tape: &mut Tape, logits: Var, mask: &Arc<Tensor>, weights: &Arc<Tensor>) -> Result<Var> {
    let lv = tape.value(logits);
    check_inputs("weighted_iou", lv.shape(), mask, weights)?;
    let s = lv.shape();
    let mean = items(s.plane(), lv, mask, weights)
        .map(|it| {
            let (i, u) = iou_terms(&it);
            iou_value(i, u)
        })
        .sum::<f64>()
        / s.batch as f64;
    let rule = WeightedIou {
        mask: Arc::clone(mask),
        weights: Arc::clone(weights),
    };
    Ok(tape.custom(&[logits], Tensor::scalar(mean), Box::new(rule)))
}

/// `L = L_iou + L_bce` for one map.
pub fn structure_loss(tape: &mut Tape, logits: Var, mask: &Arc<Tensor>, weights: &Arc<Tensor>) -> Result<Var> {
    let iou = weighted_iou(tape, logits, mask, weights)?;
    let bce = weighted_bce(tape, logits, mask, weights)?;
    Ok(tape.add(iou, bce)?)
}

/// Deep supervision over a list of input-resolution logit maps; the weight
/// map is computed once from `mask`.
pub fn total_loss_maps(tape: &mut Tape, maps: &[Var], mask: &Tensor) -> Result<Var> {
    let weights = Arc::new(weight_map(mask)?);
    let mask = Arc::new(mask.clone());
    let mut total: Option<Var> = None;
    for &m in maps {
        let l = structure_loss(tape, m, &mask, &weights)?;
        total = Some(match total {
            Some(t) => tape.add(t, l)?,
            None => l,
        });
    }
    total.ok_or_else(|| CoreError::Data("no side outputs to supervise".into()))
}

/// `L(C_6^up, G) + sum_k L(C_k^up, G)` for `k = 3, 4, 5`.
pub fn total_loss(tape: &mut Tape, side: &SideVars, mask: &Tensor) -> Result<Var> {
    total_loss_maps(tape, &side.upsampled(), mask)
}
