#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sinet_core::{Ctx, Mode, ParamStore};
use sinet_tensor::{Shape, Tape, Tensor, Var};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random(shape: impl Into<Shape>, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Tensor {
    let shape = shape.into();
    let data = (0..shape.volume()).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::new(shape, data).unwrap()
}

pub fn binary_mask(shape: impl Into<Shape>, rng: &mut ChaCha8Rng) -> Tensor {
    let shape = shape.into();
    let data = (0..shape.volume()).map(|_| if rng.random_bool(0.4) { 1.0 } else { 0.0 }).collect();
    Tensor::new(shape, data).unwrap()
}

/// A mask with one axis-aligned rectangle of foreground.
pub fn rect_mask(n: usize, size: usize, y0: usize, x0: usize, h: usize, w: usize) -> Tensor {
    Tensor::from_fn([n, 1, size, size], |_, _, y, x| {
        if (y0..y0 + h).contains(&y) && (x0..x0 + w).contains(&x) { 1.0 } else { 0.0 }
    })
    .unwrap()
}

pub fn set(store: &mut ParamStore, name: &str, value: Tensor) {
    let id = store.id(name).unwrap_or_else(|| panic!("no parameter {name}"));
    store.set(id, value);
}

pub fn zero(store: &mut ParamStore, name: &str) {
    let id = store.id(name).unwrap_or_else(|| panic!("no parameter {name}"));
    let shape = store.get(id).shape();
    store.set(id, Tensor::zeros(shape));
}

/// Runs `f` in evaluation mode with constant parameters and returns the
/// value of the var it yields.
pub fn eval_with<F>(store: &ParamStore, input: &Tensor, f: F) -> Tensor
where
    F: FnOnce(&mut Ctx<'_>, Var) -> Var,
{
    let mut tape = Tape::new();
    let mut ctx = Ctx::new(&mut tape, store, Mode::Eval, false);
    let x = ctx.tape.constant(input.clone());
    let out = f(&mut ctx, x);
    tape.value(out).clone()
}

pub fn rel_err(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

pub fn perturbed(t: &Tensor, index: usize, delta: f64) -> Tensor {
    let mut d = t.data().to_vec();
    d[index] += delta;
    Tensor::new(t.shape(), d).unwrap()
}
