//! The search-identification network.
//!
//! Search: pyramid levels 3-5 pass through texture enhancement and are
//! decoded into a coarse map `C_6` at stride 8. Identification: for levels
//! 5, 4, 3 in turn, three refinement blocks turn the resized coarser map into
//! a residual, giving side outputs `C_5` (stride 32), `C_4` (16) and `C_3` (8).

pub mod decoder;
pub mod gra;
pub mod tem;

use sinet_tensor::{Tape, Tensor, Var};

use crate::backbone::{check_input_size, Backbone};
use crate::config::SinetConfig;
use crate::error::Result;
use crate::layers::Builder;
use crate::params::{Ctx, Mode, ParamStore};

pub use decoder::{Decoder, DecoderOutput};
pub use gra::{group_guidance, resize_prior, reverse_guidance, GraBlock, GraOutput};
pub use tem::Tem;

/// Pyramid levels refined in the identification phase, coarsest first.
pub const REFINED_LEVELS: [usize; 3] = [5, 4, 3];
pub const BLOCKS_PER_LEVEL: usize = 3;

#[derive(Clone, Debug)]
pub struct Sinet {
    config: SinetConfig,
    backbone: Backbone,
    /// Enhancement modules for levels 3, 4, 5.
    tems: [Tem; 3],
    decoder: Decoder,
    /// Refinement blocks for levels 5, 4, 3.
    levels: [[GraBlock; BLOCKS_PER_LEVEL]; 3],
}

/// Tape handles of the four logit maps and their input-resolution copies.
#[derive(Clone, Debug)]
pub struct SideVars {
    pub c6: Var,
    pub c5: Var,
    pub c4: Var,
    pub c3: Var,
    pub c6_up: Var,
    pub c5_up: Var,
    pub c4_up: Var,
    pub c3_up: Var,
    pub enhanced: [Var; 3],
    pub decoded: DecoderOutput,
    /// `(level, block, channels)` of every interleaved guidance tensor.
    pub guided_channels: Vec<(usize, usize, usize)>,
}

impl SideVars {
    /// Input-resolution maps in supervision order `C_6, C_5, C_4, C_3`.
    pub fn upsampled(&self) -> [Var; 4] {
        [self.c6_up, self.c5_up, self.c4_up, self.c3_up]
    }
}

/// Materialized single-channel logit maps.
#[derive(Clone, Debug)]
pub struct SideOutputs {
    pub c6: Tensor,
    pub c5: Tensor,
    pub c4: Tensor,
    pub c3: Tensor,
    pub c6_up: Tensor,
    pub c5_up: Tensor,
    pub c4_up: Tensor,
    pub c3_up: Tensor,
}

impl Sinet {
    /// Builds the network and its freshly initialized parameters.
    pub fn new(config: SinetConfig) -> Result<(Self, ParamStore)> {
        config.validate()?;
        let mut store = ParamStore::new();
        let mut b = Builder::new(&mut store, config.init_seed);
        let backbone = Backbone::build(&config.backbone, &mut b);
        let widths = config.backbone.level_channels();
        let tems = [3, 4, 5].map(|k| Tem::build(&format!("tem{k}"), widths[k - 1], &config, &mut b));
        let decoder = Decoder::build(&config, &mut b);
        let levels = REFINED_LEVELS.map(|k| {
            [0, 1, 2].map(|i| GraBlock::build(&format!("gra{k}.block{}", i + 1), &config, i, &mut b))
        });
        Ok((
            Self {
                config,
                backbone,
                tems,
                decoder,
                levels,
            },
            store,
        ))
    }

    pub fn config(&self) -> &SinetConfig {
        &self.config
    }

    pub fn backbone(&self) -> &Backbone {
        &self.backbone
    }

    pub fn tem(&self, level: usize) -> &Tem {
        &self.tems[level - 3]
    }

    pub fn decoder(&self) -> &Decoder {
        &self.decoder
    }

    pub fn forward(&self, ctx: &mut Ctx<'_>, image: Var) -> Result<SideVars> {
        let is = ctx.tape.shape(image);
        check_input_size(is.height, is.width)?;
        let pyramid = self.backbone.extract_pyramid(ctx, image)?;
        let mut enhanced = [image; 3];
        for (slot, k) in enhanced.iter_mut().zip(3..=5) {
            *slot = self.tems[k - 3].forward(ctx, pyramid.level(k))?;
        }
        let decoded = self.decoder.forward(ctx, enhanced[0], enhanced[1], enhanced[2])?;

        let mut coarser = decoded.coarse;
        let mut side = [coarser; 3];
        let mut guided_channels = Vec::new();
        for (li, &k) in REFINED_LEVELS.iter().enumerate() {
            let prior = resize_prior(ctx.tape, coarser, k)?;
            let prob = ctx.tape.sigmoid(prior);
            // f'_k = p_1^k
            let mut features = enhanced[k - 3];
            let mut guidance = prob;
            for (i, block) in self.levels[li].iter().enumerate() {
                if block.reverse_input {
                    guidance = if i == 0 {
                        ctx.tape.reverse(prob)
                    } else {
                        let s = ctx.tape.sigmoid(guidance);
                        ctx.tape.reverse(s)
                    };
                }
                let out = block.forward(ctx, features, guidance)?;
                guided_channels.push((k, i + 1, out.guided_channels));
                features = out.features;
                guidance = out.guidance;
            }
            coarser = ctx.tape.add(guidance, prior)?;
            side[li] = coarser;
        }
        let [c5, c4, c3] = side;
        let up = |tape: &mut Tape, v: Var| tape.resize_bilinear(v, is.height, is.width);
        Ok(SideVars {
            c6: decoded.coarse,
            c5,
            c4,
            c3,
            c6_up: up(ctx.tape, decoded.coarse)?,
            c5_up: up(ctx.tape, c5)?,
            c4_up: up(ctx.tape, c4)?,
            c3_up: up(ctx.tape, c3)?,
            enhanced,
            decoded,
            guided_channels,
        })
    }

    /// Inference-mode forward on constants.
    pub fn predict(&self, store: &ParamStore, image: &Tensor) -> Result<SideOutputs> {
        let mut tape = Tape::new();
        let mut ctx = Ctx::new(&mut tape, store, Mode::Eval, false);
        let x = ctx.tape.constant(image.clone());
        let v = self.forward(&mut ctx, x)?;
        let get = |var: Var| tape.value(var).clone();
        Ok(SideOutputs {
            c6: get(v.c6),
            c5: get(v.c5),
            c4: get(v.c4),
            c3: get(v.c3),
            c6_up: get(v.c6_up),
            c5_up: get(v.c5_up),
            c4_up: get(v.c4_up),
            c3_up: get(v.c3_up),
        })
    }
}
