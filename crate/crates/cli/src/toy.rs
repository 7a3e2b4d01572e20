//! Synthetic-blob training runs and the ablation grid built on them.

use sinet_core::synthetic::blob_dataset;
use sinet_core::train::{train, StepRecord};
use sinet_core::{LossCurve, ParamStore, Sample, Sinet};
use sinet_eval::evaluate::MetricReport;
use sinet_eval::{evaluate, BinaryMask, GrayMap};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::imageio::{mask_of, predict_map, quantized};
use crate::report::{AblationRow, TrainReport};

/// Steps averaged for the final loss.
pub const LOSS_TAIL: usize = 10;
/// Foreground threshold on the predicted probability.
pub const IOU_THRESHOLD: f64 = 0.5;

pub struct ToyRun {
    pub net: Sinet,
    pub store: ParamStore,
    pub curve: LossCurve,
    /// Full-precision probabilities, one per sample.
    pub probabilities: Vec<GrayMap>,
    pub masks: Vec<BinaryMask>,
    pub report: TrainReport,
}

/// `(initial, final, drop)`: the first step's loss, the mean of the last
/// [`LOSS_TAIL`] steps and the relative decrease between them.
pub fn loss_drop(losses: &[f64]) -> Option<(f64, f64, f64)> {
    let first = *losses.first()?;
    let tail = &losses[losses.len().saturating_sub(LOSS_TAIL)..];
    let last = tail.iter().sum::<f64>() / tail.len() as f64;
    Some((first, last, (first - last) / first))
}

/// IoU of `prob >= 0.5` against the mask; two empty sets score 1.
pub fn mask_iou(prob: &GrayMap, mask: &BinaryMask) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &g) in prob.values().iter().zip(mask.bits()) {
        let f = p >= IOU_THRESHOLD;
        inter += usize::from(f && g);
        union += usize::from(f || g);
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

pub fn toy_data(cfg: &RunConfig) -> Vec<Sample> {
    blob_dataset(&cfg.toy)
}

/// Trains a fresh model on `data` and scores it on the same images.
pub fn run_toy(cfg: &RunConfig, data: &[Sample], on_step: impl FnMut(&StepRecord)) -> Result<ToyRun> {
    cfg.validate()?;
    let (net, mut store) = Sinet::new(cfg.model.clone())?;
    let curve = train(&net, &mut store, data, &cfg.train_config(), on_step)?;
    let (initial_loss, final_loss, drop) =
        loss_drop(&curve.losses()).ok_or_else(|| CliError::Validation("training produced no steps".into()))?;
    let mut probabilities = Vec::with_capacity(data.len());
    let mut masks = Vec::with_capacity(data.len());
    let mut scores = Vec::with_capacity(data.len());
    let mut iou = 0.0;
    for s in data {
        let size = s.image.shape().height;
        let prob = predict_map(&net, &store, &s.image, size)?;
        let mask = mask_of(&s.mask)?;
        iou += mask_iou(&prob, &mask);
        scores.push(evaluate(&quantized(&prob), &mask)?);
        probabilities.push(prob);
        masks.push(mask);
    }
    let report = TrainReport {
        config: cfg.to_kv_string(),
        images: data.len(),
        steps: curve.steps.len(),
        initial_loss,
        final_loss,
        loss_drop: drop,
        iou: iou / data.len() as f64,
        scores: MetricReport::aggregate(&scores).map(|r| r.scores),
    };
    Ok(ToyRun {
        net,
        store,
        curve,
        probabilities,
        masks,
        report,
    })
}

/// One ablation setting: a name and the keys it changes.
#[derive(Clone, Debug, PartialEq)]
pub struct Variant {
    pub name: String,
    pub overrides: Vec<(String, String)>,
}

impl Variant {
    pub fn new(name: &str, overrides: &[(&str, &str)]) -> Self {
        Self {
            name: name.into(),
            overrides: overrides.iter().map(|&(k, v)| (k.into(), v.into())).collect(),
        }
    }

    pub fn apply(&self, base: &RunConfig) -> Result<RunConfig> {
        let mut cfg = base.clone();
        for (k, v) in &self.overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()
            .map_err(|e| CliError::Config(format!("variant {}: {e}", self.name)))?;
        Ok(cfg)
    }
}

/// The baseline plus one change at a time along each axis.
pub fn default_variants() -> Vec<Variant> {
    vec![
        Variant::new("baseline", &[]),
        Variant::new("decoder=pd", &[("decoder", "pd")]),
        Variant::new("tem_conv=sym", &[("tem_conv", "sym")]),
        Variant::new("reverse=000", &[("reverse", "000")]),
        Variant::new("reverse=110", &[("reverse", "110")]),
        Variant::new("reverse=111", &[("reverse", "111")]),
        Variant::new("groups=1;1;1", &[("groups", "1;1;1")]),
        Variant::new("groups=8;8;8", &[("groups", "8;8;8")]),
        Variant::new("groups=32;32;32", &[("groups", "32;32;32")]),
        Variant::new("groups=1;8;32", &[("groups", "1;8;32")]),
    ]
}

/// Cartesian product of `key = a | b | c` lines.
pub fn parse_grid(text: &str) -> Result<Vec<Variant>> {
    let mut axes: Vec<(String, Vec<String>)> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let (k, vs) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("grid line {}: expected key = v1 | v2", n + 1)))?;
        let values: Vec<String> = vs.split('|').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(CliError::Config(format!("grid line {}: no values", n + 1)));
        }
        axes.push((k.trim().to_string(), values));
    }
    if axes.is_empty() {
        return Err(CliError::Config("grid file defines no axes".into()));
    }
    let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (k, values) in &axes {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.push((k.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    Ok(combos
        .into_iter()
        .map(|overrides| Variant {
            name: overrides.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" "),
            overrides,
        })
        .collect())
}

/// Validates every variant, then trains each on the same data.
pub fn run_ablation(
    base: &RunConfig,
    variants: &[Variant],
    mut on_variant: impl FnMut(&Variant, &ToyRun),
) -> Result<Vec<AblationRow>> {
    let configs = variants.iter().map(|v| v.apply(base)).collect::<Result<Vec<_>>>()?;
    let data = toy_data(base);
    let mut rows = Vec::with_capacity(variants.len());
    for (v, cfg) in variants.iter().zip(&configs) {
        let run = run_toy(cfg, &data, |_| {})?;
        on_variant(v, &run);
        rows.push(AblationRow {
            name: v.name.clone(),
            overrides: v.overrides.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" "),
            decoder: cfg.model.decoder.to_string(),
            tem_conv: cfg.model.tem_conv.to_string(),
            reverse: cfg.model.reverse.to_string(),
            groups: cfg.model.groups.to_string(),
            result: run.report,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_drop_uses_first_step_and_tail_mean() {
        let losses: Vec<f64> = (0..20).map(|i| 20.0 - i as f64).collect();
        let (a, b, d) = loss_drop(&losses).unwrap();
        assert_eq!(a, 20.0);
        assert_eq!(b, 5.5);
        assert!((d - 0.725).abs() < 1e-12);
        assert_eq!(loss_drop(&[]), None);
    }

    #[test]
    fn iou_of_threshold() {
        let g = BinaryMask::from_fn(2, 2, |r, _| r == 0);
        let p = GrayMap::new(2, 2, vec![0.5, 0.2, 0.7, 0.1]).unwrap();
        assert!((mask_iou(&p, &g) - 1.0 / 3.0).abs() < 1e-15);
        let empty = BinaryMask::from_fn(2, 2, |_, _| false);
        assert_eq!(mask_iou(&GrayMap::constant(2, 2, 0.1).unwrap(), &empty), 1.0);
    }

    #[test]
    fn grid_product_and_defaults() {
        let g = parse_grid("decoder = ncd | pd\ngroups = 1;1;1 | 8;8;8 | 32;8;1\n").unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g[5].name, "decoder=pd groups=32;8;1");
        let v = default_variants();
        assert_eq!(v.len(), 10);
        let bad = Variant::new("g3", &[("groups", "3;3;3")]);
        assert!(matches!(bad.apply(&RunConfig::default()), Err(CliError::Config(_))));
    }
}
