//! Texture enhancement: parallel dilated branches plus a residual shortcut.

use sinet_tensor::{ConvSpec, Var};

use crate::config::{ConvStyle, SinetConfig};
use crate::error::Result;
use crate::layers::{Builder, ConvUnit};
use crate::params::Ctx;

#[derive(Clone, Debug)]
pub struct Tem {
    branches: Vec<Vec<ConvUnit>>,
    fuse: ConvUnit,
    shortcut: ConvUnit,
}

impl Tem {
    /// Branch `i` with dilation `d`: a 1x1 reduction, then for `d > 1` a
    /// `d x d` convolution (factorized in asymmetric mode) and a 3x3
    /// convolution dilated by `d`.
    pub fn build(name: &str, in_channels: usize, cfg: &SinetConfig, b: &mut Builder<'_>) -> Self {
        let bc = cfg.branch_channels;
        let branches = cfg
            .dilations
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let prefix = format!("{name}.branch{i}");
                let mut units = vec![b.conv_bn(&format!("{prefix}.reduce"), ConvSpec::square(in_channels, bc, 1))];
                if d > 1 {
                    match cfg.tem_conv {
                        ConvStyle::Asymmetric => {
                            units.push(b.conv_bn(&format!("{prefix}.col"), ConvSpec::new(bc, bc, d, 1)));
                            units.push(b.conv_bn(&format!("{prefix}.row"), ConvSpec::new(bc, bc, 1, d)));
                        }
                        ConvStyle::Symmetric => {
                            units.push(b.conv_bn(&format!("{prefix}.full"), ConvSpec::square(bc, bc, d)));
                        }
                    }
                    units.push(b.conv_bn(
                        &format!("{prefix}.dilated"),
                        ConvSpec::square(bc, bc, 3).dilated(d),
                    ));
                }
                units
            })
            .collect::<Vec<_>>();
        let fuse = b.conv_bn(
            &format!("{name}.fuse"),
            ConvSpec::square(bc * cfg.dilations.len(), cfg.channels, 3),
        );
        let shortcut = b.conv_bn(&format!("{name}.shortcut"), ConvSpec::square(in_channels, cfg.channels, 1));
        Self {
            branches,
            fuse,
            shortcut,
        }
    }

    pub fn forward(&self, ctx: &mut Ctx<'_>, x: Var) -> Result<Var> {
        let mut outs = Vec::with_capacity(self.branches.len());
        for branch in &self.branches {
            let mut y = x;
            for unit in branch {
                y = unit.forward(ctx, y)?;
            }
            outs.push(y);
        }
        let cat = ctx.tape.concat_channels(&outs)?;
        let fused = self.fuse.forward(ctx, cat)?;
        let short = self.shortcut.forward(ctx, x)?;
        let sum = ctx.tape.add(fused, short)?;
        Ok(ctx.tape.relu(sum))
    }
}
