//! Five-level strided feature pyramid.
//!
//! A stride-2 stem followed by four stride-2 stages of two conv-bn-relu
//! blocks each. Level `k` (1-based) has spatial size `H / 2^k x W / 2^k`.

use sinet_tensor::{ConvSpec, Var};

use crate::error::{CoreError, Result};
use crate::layers::{Builder, ConvUnit};
use crate::params::Ctx;

pub const LEVELS: usize = 5;
/// Input extents must be multiples of this.
pub const INPUT_MULTIPLE: usize = 1 << LEVELS;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BackboneConfig {
    pub in_channels: usize,
    pub stem_channels: usize,
    pub stage_channels: [usize; 4],
}

impl Default for BackboneConfig {
    fn default() -> Self {
        Self {
            in_channels: 3,
            stem_channels: 16,
            stage_channels: [24, 32, 48, 64],
        }
    }
}

impl BackboneConfig {
    /// Channel width of each pyramid level `f_1..f_5`.
    pub fn level_channels(&self) -> [usize; LEVELS] {
        let s = self.stage_channels;
        [self.stem_channels, s[0], s[1], s[2], s[3]]
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.level_channels().contains(&0) {
            return Err(CoreError::Config("backbone channel widths must be positive".into()));
        }
        Ok(())
    }
}

/// The five pyramid levels, finest first.
#[derive(Clone, Copy, Debug)]
pub struct FeaturePyramid {
    pub levels: [Var; LEVELS],
}

impl FeaturePyramid {
    /// Level `k` in 1-based pyramid numbering.
    pub fn level(&self, k: usize) -> Var {
        self.levels[k - 1]
    }
}

#[derive(Clone, Debug)]
pub struct Backbone {
    stem: ConvUnit,
    stages: Vec<[ConvUnit; 2]>,
}

pub fn check_input_size(height: usize, width: usize) -> Result<()> {
    for (dim, size) in [("height", height), ("width", width)] {
        if size == 0 || size % INPUT_MULTIPLE != 0 {
            return Err(CoreError::InputSize {
                dim,
                size,
                divisor: INPUT_MULTIPLE,
            });
        }
    }
    Ok(())
}

impl Backbone {
    pub fn build(config: &BackboneConfig, b: &mut Builder<'_>) -> Self {
        let stem = b.conv_bn_relu(
            "backbone.stem",
            ConvSpec::square(config.in_channels, config.stem_channels, 3).strided(2),
        );
        let mut prev = config.stem_channels;
        let stages = config
            .stage_channels
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let first = b.conv_bn_relu(
                    &format!("backbone.stage{}.0", i + 2),
                    ConvSpec::square(prev, c, 3).strided(2),
                );
                let second = b.conv_bn_relu(&format!("backbone.stage{}.1", i + 2), ConvSpec::square(c, c, 3));
                prev = c;
                [first, second]
            })
            .collect();
        Self { stem, stages }
    }

    pub fn extract_pyramid(&self, ctx: &mut Ctx<'_>, image: Var) -> Result<FeaturePyramid> {
        let s = ctx.tape.shape(image);
        check_input_size(s.height, s.width)?;
        let mut x = self.stem.forward(ctx, image)?;
        let mut levels = [x; LEVELS];
        for (i, [first, second]) in self.stages.iter().enumerate() {
            x = first.forward(ctx, x)?;
            x = second.forward(ctx, x)?;
            levels[i + 1] = x;
        }
        Ok(FeaturePyramid { levels })
    }
}
