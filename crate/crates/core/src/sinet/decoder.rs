//! Coarse localization from the three deepest enhanced features.

use sinet_tensor::{ConvSpec, Var};

use crate::config::{DecoderStyle, SinetConfig};
use crate::error::Result;
use crate::layers::{Builder, ConvUnit};
use crate::params::Ctx;

#[derive(Clone, Debug)]
pub struct Decoder {
    style: DecoderStyle,
    gates: [ConvUnit; 3],
    head_mid: ConvUnit,
    head_fine: ConvUnit,
    out: ConvUnit,
}

/// Refined features (strides 8, 16, 32) and the single-channel coarse map.
#[derive(Clone, Copy, Debug)]
pub struct DecoderOutput {
    pub refined3: Var,
    pub refined4: Var,
    pub refined5: Var,
    pub coarse: Var,
}

impl Decoder {
    pub fn build(cfg: &SinetConfig, b: &mut Builder<'_>) -> Self {
        let c = cfg.channels;
        let gate = |b: &mut Builder<'_>, u: usize| b.conv_bn(&format!("decoder.gate{u}"), ConvSpec::square(c, c, 3));
        let gates = [gate(b, 1), gate(b, 2), gate(b, 3)];
        Self {
            style: cfg.decoder,
            gates,
            head_mid: b.conv_bn_relu("decoder.head_mid", ConvSpec::square(2 * c, c, 3)),
            head_fine: b.conv_bn_relu("decoder.head_fine", ConvSpec::square(2 * c, c, 3)),
            out: b.conv("decoder.out", ConvSpec::square(c, 1, 3)),
        }
    }

    /// `f3`, `f4`, `f5` are the enhanced features at strides 8, 16 and 32.
    pub fn forward(&self, ctx: &mut Ctx<'_>, f3: Var, f4: Var, f5: Var) -> Result<DecoderOutput> {
        let refined5 = f5;
        let up5 = ctx.tape.upsample_bilinear(f5, 2)?;
        let g1 = self.gates[0].forward(ctx, up5)?;
        let refined4 = ctx.tape.mul(f4, g1)?;

        // the two variants differ only in what gates the finest level
        let lower = match self.style {
            DecoderStyle::Ncd => ctx.tape.upsample_bilinear(refined4, 2)?,
            DecoderStyle::Pd => ctx.tape.upsample_bilinear(f5, 4)?,
        };
        let g2 = self.gates[1].forward(ctx, lower)?;
        let up4 = ctx.tape.upsample_bilinear(f4, 2)?;
        let g3 = self.gates[2].forward(ctx, up4)?;
        let gated = ctx.tape.mul(f3, g2)?;
        let refined3 = ctx.tape.mul(gated, g3)?;

        let top = ctx.tape.upsample_bilinear(refined5, 2)?;
        let mid = ctx.tape.concat_channels(&[top, refined4])?;
        let mid = self.head_mid.forward(ctx, mid)?;
        let mid_up = ctx.tape.upsample_bilinear(mid, 2)?;
        let fine = ctx.tape.concat_channels(&[mid_up, refined3])?;
        let fine = self.head_fine.forward(ctx, fine)?;
        let coarse = self.out.forward(ctx, fine)?;
        Ok(DecoderOutput {
            refined3,
            refined4,
            refined5,
            coarse,
        })
    }
}
