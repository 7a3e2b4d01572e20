mod common;

use std::sync::Arc;

use common::{binary_mask, random, rng};
use sinet_core::loss::{structure_loss, total_loss_maps, weight_map, weighted_bce, weighted_iou};
use sinet_core::CoreError;
use sinet_tensor::{Tape, Tensor};

fn eval(logits: &Tensor, mask: &Tensor, weights: &Tensor, f: fn(&mut Tape, sinet_tensor::Var, &Arc<Tensor>, &Arc<Tensor>) -> sinet_core::Result<sinet_tensor::Var>) -> f64 {
    let mut tape = Tape::new();
    let x = tape.constant(logits.clone());
    let l = f(&mut tape, x, &Arc::new(mask.clone()), &Arc::new(weights.clone())).unwrap();
    tape.value(l).item().unwrap()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[test]
fn saturated_correct_prediction_is_nearly_free() {
    let mask = common::rect_mask(1, 32, 4, 4, 10, 12);
    let logits = Tensor::from_fn(mask.shape(), |n, c, y, x| if mask.at(n, c, y, x) == 1.0 { 20.0 } else { -20.0 }).unwrap();
    let w = weight_map(&mask).unwrap();
    assert!(eval(&logits, &mask, &w, structure_loss) < 1e-6);
}

#[test]
fn uninformed_prediction_costs_ln2() {
    let mask = binary_mask([2, 1, 16, 16], &mut rng(1));
    let w = weight_map(&mask).unwrap();
    let bce = eval(&Tensor::zeros(mask.shape()), &mask, &w, weighted_bce);
    assert!((bce - std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn empty_prediction_has_unit_iou_loss() {
    let mask = common::rect_mask(1, 16, 2, 2, 5, 5);
    let w = weight_map(&mask).unwrap();
    let iou = eval(&Tensor::full(mask.shape(), -800.0), &mask, &w, weighted_iou);
    assert!((iou - 1.0).abs() < 1e-12);
}

#[test]
fn small_case_matches_hand_sum() {
    let g = [1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
    let x = [2.0, -1.0, 0.5, 1.5, -0.5, 0.0, -2.0, 1.0, -3.0];
    let w = [1.0, 2.0, 1.5, 1.0, 3.0, 1.0, 1.0, 2.5, 1.0];
    let mask = Tensor::new([1, 1, 3, 3], g.to_vec()).unwrap();
    let logits = Tensor::new([1, 1, 3, 3], x.to_vec()).unwrap();
    let weights = Tensor::new([1, 1, 3, 3], w.to_vec()).unwrap();
    let mut bce = 0.0;
    let mut inter = 0.0;
    let mut union = 0.0;
    for i in 0..9 {
        let p = sigmoid(x[i]);
        bce += w[i] * -(g[i] * p.ln() + (1.0 - g[i]) * (1.0 - p).ln());
        inter += w[i] * p * g[i];
        union += w[i] * (p + g[i] - p * g[i]);
    }
    bce /= w.iter().sum::<f64>();
    let iou = 1.0 - inter / union;
    assert!((eval(&logits, &mask, &weights, weighted_bce) - bce).abs() < 1e-12);
    assert!((eval(&logits, &mask, &weights, weighted_iou) - iou).abs() < 1e-12);
    assert!((eval(&logits, &mask, &weights, structure_loss) - bce - iou).abs() < 1e-12);
}

#[test]
fn weight_map_matches_window_mean() {
    let mask = common::rect_mask(1, 40, 10, 5, 12, 20);
    let w = weight_map(&mask).unwrap();
    for &(y, x) in &[(0usize, 0usize), (10, 5), (21, 24), (39, 39), (15, 30)] {
        let mut s = 0.0;
        for dy in -15i64..=15 {
            for dx in -15i64..=15 {
                let (yy, xx) = (y as i64 + dy, x as i64 + dx);
                if (0..40).contains(&yy) && (0..40).contains(&xx) {
                    s += mask.at(0, 0, yy as usize, xx as usize);
                }
            }
        }
        let expect = 1.0 + 5.0 * (s / 961.0 - mask.at(0, 0, y, x)).abs();
        assert!((w.at(0, 0, y, x) - expect).abs() < 1e-12, "({y},{x})");
    }
}

#[test]
fn losses_are_invariant_to_weight_scale() {
    let mut r = rng(2);
    let mask = binary_mask([2, 1, 12, 12], &mut r);
    let logits = random([2, 1, 12, 12], &mut r, -2.0, 2.0);
    let w = weight_map(&mask).unwrap();
    let w3 = Tensor::new(w.shape(), w.data().iter().map(|v| v * 3.0).collect()).unwrap();
    let a = eval(&logits, &mask, &w, structure_loss);
    let b = eval(&logits, &mask, &w3, structure_loss);
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn batch_average_and_deep_supervision_sum() {
    let mut r = rng(3);
    let mask = binary_mask([2, 1, 12, 12], &mut r);
    let logits = random([2, 1, 12, 12], &mut r, -2.0, 2.0);
    let w = weight_map(&mask).unwrap();
    let whole = eval(&logits, &mask, &w, structure_loss);
    let halves: f64 = (0..2)
        .map(|n| eval(&logits.batch_item(n), &mask.batch_item(n), &w.batch_item(n), structure_loss))
        .sum();
    assert!((whole - halves / 2.0).abs() < 1e-12);

    let mut tape = Tape::new();
    let a = tape.constant(logits.clone());
    let b = tape.constant(Tensor::zeros(logits.shape()));
    let total = total_loss_maps(&mut tape, &[a, b, a, a], &mask).unwrap();
    let expect = 3.0 * whole + eval(&Tensor::zeros(logits.shape()), &mask, &w, structure_loss);
    assert!((tape.value(total).item().unwrap() - expect).abs() < 1e-12);
}

#[test]
fn rejects_bad_targets() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::zeros([1, 1, 4, 4]));
    let soft = Tensor::full([1, 1, 4, 4], 0.5);
    assert!(matches!(total_loss_maps(&mut tape, &[x], &soft), Err(CoreError::Data(_))));
    let wrong = Tensor::zeros([1, 1, 4, 5]);
    assert!(total_loss_maps(&mut tape, &[x], &wrong).is_err());
    assert!(total_loss_maps(&mut tape, &[], &Tensor::zeros([1, 1, 4, 4])).is_err());
}
