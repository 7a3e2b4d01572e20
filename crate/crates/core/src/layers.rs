use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sinet_tensor::{ConvSpec, Shape, Tensor, Var, BN_EPS};

use crate::error::Result;
use crate::params::{BnUpdate, Ctx, Mode, ParamId, ParamStore};

#[derive(Clone, Debug)]
pub struct BatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
}

impl BatchNorm {
    pub fn forward(&self, ctx: &mut Ctx<'_>, x: Var) -> Result<Var> {
        let (gamma, beta) = (ctx.var(self.gamma), ctx.var(self.beta));
        match ctx.mode {
            Mode::Eval => {
                let mean = ctx.store.get(self.running_mean);
                let var = ctx.store.get(self.running_var);
                Ok(ctx.tape.batchnorm(x, gamma, beta, mean, var, BN_EPS)?)
            }
            Mode::Train => {
                let (y, stats) = ctx.tape.batchnorm_train(x, gamma, beta, BN_EPS)?;
                ctx.record_update(BnUpdate {
                    mean: self.running_mean,
                    var: self.running_var,
                    stats,
                });
                Ok(y)
            }
        }
    }
}

/// Convolution, optionally followed by batchnorm and ReLU.
#[derive(Clone, Debug)]
pub struct ConvUnit {
    pub spec: ConvSpec,
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub bn: Option<BatchNorm>,
    pub relu: bool,
}

impl ConvUnit {
    pub fn forward(&self, ctx: &mut Ctx<'_>, x: Var) -> Result<Var> {
        let w = ctx.var(self.weight);
        let b = self.bias.map(|b| ctx.var(b));
        let mut y = ctx.tape.conv2d(x, self.spec, w, b)?;
        if let Some(bn) = &self.bn {
            y = bn.forward(ctx, y)?;
        }
        if self.relu {
            y = ctx.tape.relu(y);
        }
        Ok(y)
    }
}

/// Registers layers under a dotted name prefix with seeded He-normal weights.
pub struct Builder<'a> {
    store: &'a mut ParamStore,
    rng: ChaCha8Rng,
}

impl<'a> Builder<'a> {
    pub fn new(store: &'a mut ParamStore, seed: u64) -> Self {
        Self {
            store,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn he_weight(&mut self, spec: &ConvSpec) -> Tensor {
        let std = (2.0 / spec.fan_in() as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("valid std");
        let shape = spec.weight_shape();
        let data = (0..shape.volume()).map(|_| normal.sample(&mut self.rng)).collect();
        Tensor::new(shape, data).expect("finite init")
    }

    fn batchnorm(&mut self, name: &str, channels: usize) -> BatchNorm {
        let shape = Shape::new(1, channels, 1, 1);
        BatchNorm {
            gamma: self.store.add(format!("{name}.bn.gamma"), Tensor::ones(shape), true),
            beta: self.store.add(format!("{name}.bn.beta"), Tensor::zeros(shape), true),
            running_mean: self.store.add(format!("{name}.bn.running_mean"), Tensor::zeros(shape), false),
            running_var: self.store.add(format!("{name}.bn.running_var"), Tensor::ones(shape), false),
        }
    }

    fn unit(&mut self, name: &str, spec: ConvSpec, bias: bool, bn: bool, relu: bool) -> ConvUnit {
        let w = self.he_weight(&spec);
        let weight = self.store.add(format!("{name}.weight"), w, true);
        let bias = bias.then(|| {
            self.store.add(
                format!("{name}.bias"),
                Tensor::zeros(Shape::new(1, spec.out_channels, 1, 1)),
                true,
            )
        });
        let bn = bn.then(|| self.batchnorm(name, spec.out_channels));
        ConvUnit {
            spec: if bn.is_some() { spec.with_batchnorm() } else { spec },
            weight,
            bias,
            bn,
            relu,
        }
    }

    /// Bias-free convolution + batchnorm.
    pub fn conv_bn(&mut self, name: &str, spec: ConvSpec) -> ConvUnit {
        self.unit(name, spec, false, true, false)
    }

    /// Bias-free convolution + batchnorm + ReLU.
    pub fn conv_bn_relu(&mut self, name: &str, spec: ConvSpec) -> ConvUnit {
        self.unit(name, spec, false, true, true)
    }

    /// Plain convolution with bias.
    pub fn conv(&mut self, name: &str, spec: ConvSpec) -> ConvUnit {
        self.unit(name, spec, true, false, false)
    }
}
