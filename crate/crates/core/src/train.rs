//! Adam training loop with step learning-rate decay.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sinet_tensor::{Tape, Tensor};

use crate::error::{CoreError, Result};
use crate::loss::total_loss;
use crate::params::{apply_bn_updates, Ctx, Mode, ParamId, ParamStore};
use crate::sinet::Sinet;

/// One image (1x3xHxW, values in [0,1]) and its binary mask (1x1xHxW).
#[derive(Clone, Debug)]
pub struct Sample {
    pub image: Tensor,
    pub mask: Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Divide the rate by `decay_factor` every this many epochs.
    pub decay_every: usize,
    pub decay_factor: f64,
    pub epochs: usize,
    /// Stops early after this many optimizer steps.
    pub max_steps: Option<usize>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 36,
            learning_rate: 1e-4,
            decay_every: 50,
            decay_factor: 10.0,
            epochs: 100,
            max_steps: None,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CoreError::Config(m.to_string()));
        if self.batch_size == 0 || self.epochs == 0 || self.decay_every == 0 {
            return bad("batch size, epochs and decay interval must be positive");
        }
        if !(self.learning_rate >= 0.0) || !(self.decay_factor > 0.0) || !(self.eps > 0.0) {
            return bad("learning rate must be >= 0, decay factor and eps > 0");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn lr_at_epoch(&self, epoch: usize) -> f64 {
        self.learning_rate / self.decay_factor.powi((epoch / self.decay_every) as i32)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossCurve {
    pub steps: Vec<StepRecord>,
}

impl LossCurve {
    pub fn losses(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.loss).collect()
    }

    /// `step,loss` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,loss\n");
        for s in &self.steps {
            let _ = writeln!(out, "{},{}", s.step, s.loss);
        }
        out
    }
}

/// Adam moment estimates for every trainable parameter.
pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(store: &ParamStore, cfg: &TrainConfig) -> Self {
        let zeros = || store.iter().map(|(_, p)| vec![0.0; if p.trainable { p.value.len() } else { 0 }]).collect();
        Self {
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            t: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &[(ParamId, Tensor)], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (id, g) in grads {
            let i = id.index();
            let value = store.get(*id);
            let mut data = value.data().to_vec();
            for (k, (theta, &gk)) in data.iter_mut().zip(g.data()).enumerate() {
                let m = &mut self.m[i][k];
                let v = &mut self.v[i][k];
                *m = self.beta1 * *m + (1.0 - self.beta1) * gk;
                *v = self.beta2 * *v + (1.0 - self.beta2) * gk * gk;
                *theta -= lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
            }
            let shape = value.shape();
            store.set(*id, Tensor::new(shape, data).expect("finite parameter update"));
        }
    }
}

/// Stacks the selected samples into an image batch and a mask batch.
pub fn collate(data: &[Sample], indices: &[usize]) -> Result<(Tensor, Tensor)> {
    let images: Vec<Tensor> = indices.iter().map(|&i| data[i].image.clone()).collect();
    let masks: Vec<Tensor> = indices.iter().map(|&i| data[i].mask.clone()).collect();
    Ok((Tensor::stack_batch(&images)?, Tensor::stack_batch(&masks)?))
}

/// One forward-backward pass in training mode. Returns the loss, the
/// trainable gradients and the pending batchnorm updates applied to `store`.
pub fn loss_and_grads(net: &Sinet, store: &ParamStore, images: &Tensor, masks: &Tensor) -> Result<(f64, Vec<(ParamId, Tensor)>, Vec<crate::params::BnUpdate>)> {
    let mut tape = Tape::new();
    let mut ctx = Ctx::new(&mut tape, store, Mode::Train, true);
    let x = ctx.tape.constant(images.clone());
    let side = net.forward(&mut ctx, x)?;
    let updates = ctx.take_updates();
    let param_vars: Vec<_> = store.trainable().map(|id| (id, ctx.var(id))).collect();
    let loss = total_loss(&mut tape, &side, masks)?;
    let value = tape.value(loss).item().expect("scalar loss");
    let mut grads = tape.backward(loss)?;
    let grads = param_vars
        .into_iter()
        .map(|(id, v)| {
            let g = grads.take(v).unwrap_or_else(|| Tensor::zeros(store.get(id).shape()));
            (id, g)
        })
        .collect();
    Ok((value, grads, updates))
}

/// Trains `store` in place. `on_step` sees every step as it completes.
pub fn train(
    net: &Sinet,
    store: &mut ParamStore,
    data: &[Sample],
    cfg: &TrainConfig,
    mut on_step: impl FnMut(&StepRecord),
) -> Result<LossCurve> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(CoreError::Data("training set is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(store, cfg);
    let mut curve = LossCurve::default();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut step = 0;
    'epochs: for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let lr = cfg.lr_at_epoch(epoch);
        for batch in order.chunks(cfg.batch_size) {
            if cfg.max_steps.is_some_and(|m| step >= m) {
                break 'epochs;
            }
            let (images, masks) = collate(data, batch)?;
            let (loss, grads, updates) = loss_and_grads(net, store, &images, &masks)?;
            adam.step(store, &grads, lr);
            apply_bn_updates(store, &updates);
            let record = StepRecord { step, epoch, lr, loss };
            on_step(&record);
            curve.steps.push(record);
            step += 1;
        }
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_decay_schedule() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.lr_at_epoch(0), 1e-4);
        assert_eq!(cfg.lr_at_epoch(49), 1e-4);
        assert!((cfg.lr_at_epoch(50) - 1e-5).abs() < 1e-20);
        assert!((cfg.lr_at_epoch(99) - 1e-5).abs() < 1e-20);
    }

    #[test]
    fn loss_curve_csv() {
        let curve = LossCurve {
            steps: vec![StepRecord { step: 0, epoch: 0, lr: 1e-3, loss: 1.5 }],
        };
        assert_eq!(curve.to_csv(), "step,loss\n0,1.5\n");
    }
}
