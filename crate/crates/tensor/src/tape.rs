//! Reverse-mode differentiation over a linear record of executed ops.
//!
//! Every op appends one node; `backward` walks the nodes from the loss back
//! to the first leaf, visiting each node once.

use crate::conv::{self, ConvSpec};
use crate::error::{Result, TensorError};
use crate::norm::{self, BatchStats};
use crate::ops;
use crate::resize;
use crate::tensor::{Shape, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Backward rule for an op defined outside this crate.
///
/// `inputs` are the forward input values in the order they were passed to
/// [`Tape::custom`]; the result holds one optional gradient per input.
pub trait Backward: Send + Sync {
    fn backward(&self, grad_out: &Tensor, inputs: &[&Tensor], output: &Tensor) -> Vec<Option<Tensor>>;
}

enum Op {
    Leaf,
    Conv2d {
        x: Var,
        weight: Var,
        bias: Option<Var>,
        spec: ConvSpec,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Tensor,
        inv_std: Vec<f64>,
        train: bool,
    },
    Relu(Var),
    Sigmoid(Var),
    Affine {
        x: Var,
        scale: f64,
    },
    Add(Var, Var),
    Mul(Var, Var),
    Resize(Var),
    Concat(Vec<Var>),
    Narrow {
        x: Var,
        start: usize,
    },
    Sum(Var),
    Custom {
        inputs: Vec<Var>,
        rule: Box<dyn Backward>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Single-threaded op record. Values are owned by the tape.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    consumed: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(acc) => {
            debug_assert_eq!(acc.shape(), g.shape());
            let summed: Vec<f64> = acc.data().iter().zip(g.data()).map(|(a, b)| a + b).collect();
            *acc = Tensor::from_op("accumulate", g.shape(), summed);
        }
        None => *slot = Some(g),
    }
}

fn zip_map(op: &'static str, a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_op(op, a.shape(), data)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A leaf whose gradient will be reported.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf treated as a constant.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.0].value.shape()
    }

    pub fn conv2d(&mut self, x: Var, spec: ConvSpec, weight: Var, bias: Option<Var>) -> Result<Var> {
        let out = ops::conv2d(
            self.value(x),
            &spec,
            self.value(weight),
            bias.map(|b| self.value(b)),
        )?;
        let needs = self.needs(x) || self.needs(weight) || bias.is_some_and(|b| self.needs(b));
        Ok(self.push(
            out,
            Op::Conv2d {
                x,
                weight,
                bias,
                spec,
            },
            needs,
        ))
    }

    /// Inference-mode batchnorm. Running statistics are constants.
    pub fn batchnorm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running_mean: &Tensor,
        running_var: &Tensor,
        eps: f64,
    ) -> Result<Var> {
        let out = norm::forward_inference(
            self.value(x),
            self.value(gamma),
            self.value(beta),
            running_mean,
            running_var,
            eps,
        )?;
        Ok(self.push_norm(x, gamma, beta, out, false).0)
    }

    /// Training-mode batchnorm over the batch statistics of `x`.
    pub fn batchnorm_train(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<(Var, BatchStats)> {
        let out = norm::forward_train(self.value(x), self.value(gamma), self.value(beta), eps)?;
        let (v, stats) = self.push_norm(x, gamma, beta, out, true);
        Ok((v, stats.expect("training stats")))
    }

    fn push_norm(&mut self, x: Var, gamma: Var, beta: Var, out: norm::NormOutput, train: bool) -> (Var, Option<BatchStats>) {
        let needs = self.needs(x) || self.needs(gamma) || self.needs(beta);
        let v = self.push(
            out.y,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat: out.xhat,
                inv_std: out.inv_std,
                train,
            },
            needs,
        );
        (v, out.stats)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = ops::relu(self.value(x));
        let needs = self.needs(x);
        self.push(out, Op::Relu(x), needs)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = ops::sigmoid(self.value(x));
        let needs = self.needs(x);
        self.push(out, Op::Sigmoid(x), needs)
    }

    /// `scale * x + shift`.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let out = ops::affine(self.value(x), scale, shift);
        let needs = self.needs(x);
        self.push(out, Op::Affine { x, scale }, needs)
    }

    /// `1 - x`, i.e. subtraction from the all-ones map.
    pub fn reverse(&mut self, x: Var) -> Var {
        self.affine(x, -1.0, 1.0)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = ops::elementwise_add(self.value(a), self.value(b))?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Add(a, b), needs))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = ops::elementwise_mul(self.value(a), self.value(b))?;
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Mul(a, b), needs))
    }

    pub fn resize_bilinear(&mut self, x: Var, height: usize, width: usize) -> Result<Var> {
        let out = ops::resize_bilinear(self.value(x), height, width)?;
        let needs = self.needs(x);
        Ok(self.push(out, Op::Resize(x), needs))
    }

    pub fn upsample_bilinear(&mut self, x: Var, factor: usize) -> Result<Var> {
        let out = ops::upsample_bilinear(self.value(x), factor)?;
        let needs = self.needs(x);
        Ok(self.push(out, Op::Resize(x), needs))
    }

    pub fn downsample(&mut self, x: Var, factor: usize) -> Result<Var> {
        let out = ops::downsample(self.value(x), factor)?;
        let needs = self.needs(x);
        Ok(self.push(out, Op::Resize(x), needs))
    }

    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        let values: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let out = ops::concat_channels(&values)?;
        let needs = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(out, Op::Concat(parts.to_vec()), needs))
    }

    pub fn narrow_channels(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let out = ops::narrow_channels(self.value(x), start, len)?;
        let needs = self.needs(x);
        Ok(self.push(out, Op::Narrow { x, start }, needs))
    }

    pub fn split_channels(&mut self, x: Var, group_size: usize) -> Result<Vec<Var>> {
        let groups = ops::check_split(self.shape(x), group_size)?;
        (0..groups)
            .map(|g| self.narrow_channels(x, g * group_size, group_size))
            .collect()
    }

    /// Sum of all elements as a 1x1x1x1 tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let out = Tensor::scalar(self.value(x).sum());
        let needs = self.needs(x);
        self.push(out, Op::Sum(x), needs)
    }

    /// Records an externally computed value with a caller-supplied backward rule.
    pub fn custom(&mut self, inputs: &[Var], output: Tensor, rule: Box<dyn Backward>) -> Var {
        let needs = inputs.iter().any(|&v| self.needs(v));
        self.push(
            output,
            Op::Custom {
                inputs: inputs.to_vec(),
                rule,
            },
            needs,
        )
    }

    /// Gradients of a scalar `loss` with respect to every tape value that
    /// depends on a parameter. A tape supports a single backward pass.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if self.consumed {
            return Err(TensorError::TapeConsumed);
        }
        let ls = self.shape(loss);
        if ls != Shape::scalar() {
            return Err(TensorError::NonScalarLoss(ls.dims()));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let contributions = self.node_backward(node, &g);
            grads[i] = Some(g);
            for (v, cg) in contributions {
                if self.needs(v) {
                    accumulate(&mut grads[v.0], cg);
                }
            }
        }
        Ok(Gradients { grads })
    }

    fn node_backward(&self, node: &Node, g: &Tensor) -> Vec<(Var, Tensor)> {
        let mut out = Vec::new();
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d {
                x,
                weight,
                bias,
                spec,
            } => {
                let grads = conv::conv2d_backward(
                    self.value(*x),
                    spec,
                    self.value(*weight),
                    g,
                    self.needs(*x),
                    self.needs(*weight),
                    bias.is_some_and(|b| self.needs(b)),
                );
                if let Some(dx) = grads.input {
                    out.push((*x, dx));
                }
                if let Some(dw) = grads.weight {
                    out.push((*weight, dw));
                }
                if let (Some(b), Some(db)) = (bias, grads.bias) {
                    let shape = self.shape(*b);
                    out.push((*b, Tensor::from_op("conv2d_backward", shape, db.into_data())));
                }
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                train,
            } => {
                let (dx, dgamma, dbeta) = norm::backward(g, xhat, self.value(*gamma), inv_std, *train);
                out.push((*x, dx));
                let gs = self.shape(*gamma);
                let bs = self.shape(*beta);
                out.push((*gamma, Tensor::from_op("batchnorm_backward", gs, dgamma.into_data())));
                out.push((*beta, Tensor::from_op("batchnorm_backward", bs, dbeta.into_data())));
            }
            Op::Relu(x) => {
                out.push((*x, zip_map("relu_backward", g, self.value(*x), |g, v| if v > 0.0 { g } else { 0.0 })));
            }
            Op::Sigmoid(x) => {
                out.push((*x, zip_map("sigmoid_backward", g, &node.value, |g, s| g * s * (1.0 - s))));
            }
            Op::Affine { x, scale } => {
                let s = *scale;
                out.push((*x, g.map("affine_backward", |v| v * s)));
            }
            Op::Add(a, b) => {
                out.push((*a, g.clone()));
                out.push((*b, g.clone()));
            }
            Op::Mul(a, b) => {
                out.push((*a, zip_map("mul_backward", g, self.value(*b), |g, v| g * v)));
                out.push((*b, zip_map("mul_backward", g, self.value(*a), |g, v| g * v)));
            }
            Op::Resize(x) => {
                out.push((*x, resize::backward(g, self.shape(*x))));
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for p in parts {
                    let c = self.shape(*p).channels;
                    if self.needs(*p) {
                        out.push((*p, ops::narrow_channels(g, offset, c).expect("concat slice")));
                    }
                    offset += c;
                }
            }
            Op::Narrow { x, start } => {
                let xs = self.shape(*x);
                let gs = g.shape();
                let mut dx = vec![0.0; xs.volume()];
                for n in 0..xs.batch {
                    let dst = n * xs.item() + start * xs.plane();
                    dx[dst..dst + gs.item()].copy_from_slice(&g.data()[n * gs.item()..(n + 1) * gs.item()]);
                }
                out.push((*x, Tensor::from_op("narrow_backward", xs, dx)));
            }
            Op::Sum(x) => {
                let v = g.data()[0];
                out.push((*x, Tensor::full(self.shape(*x), v)));
            }
            Op::Custom { inputs, rule } => {
                let values: Vec<&Tensor> = inputs.iter().map(|&v| self.value(v)).collect();
                for (v, cg) in inputs.iter().zip(rule.backward(g, &values, &node.value)) {
                    if let Some(cg) = cg {
                        out.push((*v, cg));
                    }
                }
            }
        }
        out
    }
}
