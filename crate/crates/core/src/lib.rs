//! Concealed object segmentation network built on `sinet-tensor`.
//!
//! [`Sinet`] maps an `N x 3 x H x W` image batch (H, W multiples of 32) to
//! four single-channel logit maps. [`loss`] supervises all four against a
//! binary mask and [`train`] optimizes the parameters with Adam.

pub mod backbone;
pub mod config;
pub mod error;
pub mod layers;
pub mod loss;
pub mod params;
pub mod sinet;
pub mod synthetic;
pub mod train;
pub mod weights;

pub use backbone::{BackboneConfig, FeaturePyramid};
pub use config::{ConvStyle, DecoderStyle, GroupSizes, ReversePattern, SinetConfig};
pub use error::{CoreError, Result, WeightError};
pub use params::{Ctx, Mode, ParamId, ParamStore};
pub use sinet::{SideOutputs, SideVars, Sinet};
pub use train::{LossCurve, Sample, TrainConfig};
