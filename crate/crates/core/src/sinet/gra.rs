//! Reverse guidance, group guidance interleaving and the residual
//! refinement block.

use sinet_tensor::{ConvSpec, Tape, TensorError, Var};

use crate::config::SinetConfig;
use crate::error::{CoreError, Result};
use crate::layers::{Builder, ConvUnit};
use crate::params::Ctx;

/// Resizes the coarser map `C_{k+1}` onto level `k`: x4 down-sampling for
/// `k = 5` (the coarse map sits at stride 8), x2 up-sampling for `k = 3, 4`.
pub fn resize_prior(tape: &mut Tape, coarser: Var, level: usize) -> Result<Var> {
    let channels = tape.shape(coarser).channels;
    if channels != 1 {
        return Err(TensorError::ShapeMismatch {
            op: "reverse_guidance",
            dim: "channels",
            expected: 1,
            got: channels,
        }
        .into());
    }
    match level {
        5 => Ok(tape.downsample(coarser, 4)?),
        3 | 4 => Ok(tape.upsample_bilinear(coarser, 2)?),
        other => Err(CoreError::Config(format!("pyramid level {other} has no guidance (expected 3, 4 or 5)"))),
    }
}

/// `1 - sigmoid(resized C_{k+1})`.
pub fn reverse_guidance(tape: &mut Tape, coarser: Var, level: usize) -> Result<Var> {
    let prior = resize_prior(tape, coarser, level)?;
    let s = tape.sigmoid(prior);
    Ok(tape.reverse(s))
}

/// Splits `features` into `C / group` groups and places the single-channel
/// `guidance` after each one: `[p_0..p_{g-1}, r, p_g..p_{2g-1}, r, ...]`.
pub fn group_guidance(tape: &mut Tape, features: Var, guidance: Var, group: usize) -> Result<Var> {
    let gs = tape.shape(guidance);
    if gs.channels != 1 {
        return Err(TensorError::ShapeMismatch {
            op: "group_guidance",
            dim: "guidance channels",
            expected: 1,
            got: gs.channels,
        }
        .into());
    }
    let groups = tape.split_channels(features, group)?;
    let mut parts = Vec::with_capacity(groups.len() * 2);
    for g in groups {
        parts.push(g);
        parts.push(guidance);
    }
    Ok(tape.concat_channels(&parts)?)
}

#[derive(Clone, Debug)]
pub struct GraBlock {
    pub group: usize,
    pub reverse_input: bool,
    reduce: ConvUnit,
    score: ConvUnit,
}

/// Refined features and guidance after one block, plus the channel count of
/// the interleaved intermediate.
#[derive(Clone, Copy, Debug)]
pub struct GraOutput {
    pub features: Var,
    pub guidance: Var,
    pub guided_channels: usize,
}

impl GraBlock {
    pub fn build(name: &str, cfg: &SinetConfig, block: usize, b: &mut Builder<'_>) -> Self {
        let c = cfg.channels;
        Self {
            group: cfg.groups.0[block],
            reverse_input: cfg.reverse.0[block],
            reduce: b.conv_bn(&format!("{name}.reduce"), ConvSpec::square(cfg.guided_channels(block), c, 3)),
            score: b.conv(&format!("{name}.score"), ConvSpec::square(c, 1, 3)),
        }
    }

    /// `p' = p + reduce(GGO(p, r))`, `r' = r + score(p')`. The caller decides
    /// whether `guidance` has been reversed.
    pub fn forward(&self, ctx: &mut Ctx<'_>, features: Var, guidance: Var) -> Result<GraOutput> {
        let fs = ctx.tape.shape(features);
        let gs = ctx.tape.shape(guidance);
        if fs.height != gs.height || fs.width != gs.width {
            return Err(TensorError::ShapeMismatch {
                op: "gra_block",
                dim: "guidance height",
                expected: fs.height,
                got: gs.height,
            }
            .into());
        }
        let guided = group_guidance(ctx.tape, features, guidance, self.group)?;
        let guided_channels = ctx.tape.shape(guided).channels;
        let delta = self.reduce.forward(ctx, guided)?;
        let features = ctx.tape.add(features, delta)?;
        let residual = self.score.forward(ctx, features)?;
        let guidance = ctx.tape.add(guidance, residual)?;
        Ok(GraOutput {
            features,
            guidance,
            guided_channels,
        })
    }
}
