//! Dataset-level evaluation of a prediction directory against a manifest.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetManifest;
use crate::error::{EvalError, Result};
use crate::map::{BinaryMask, GrayMap};
use crate::metrics::{evaluate, Scores};

/// Mean scores over `count` images.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub scores: Scores,
    pub count: usize,
}

impl MetricReport {
    /// Arithmetic mean, summed in the given order.
    pub fn aggregate<'a>(items: impl IntoIterator<Item = &'a Scores>) -> Option<Self> {
        let mut sum = [0.0; 4];
        let mut count = 0;
        for s in items {
            for (acc, v) in sum.iter_mut().zip(s.as_array()) {
                *acc += v;
            }
            count += 1;
        }
        if count == 0 {
            return None;
        }
        let n = count as f64;
        Some(Self {
            scores: Scores {
                s_alpha: sum[0] / n,
                e_phi: sum[1] / n,
                f_beta_w: sum[2] / n,
                mae: sum[3] / n,
            },
            count,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub stem: String,
    pub super_class: String,
    pub sub_class: String,
    pub scores: Scores,
    /// Whether the prediction was resized to the mask's dimensions.
    pub resized: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub super_class: String,
    /// `None` for a super-class row.
    pub sub_class: Option<String>,
    pub report: MetricReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub dataset: String,
    pub overall: Option<MetricReport>,
    pub super_classes: Vec<ClassReport>,
    pub sub_classes: Vec<ClassReport>,
    pub images: Vec<ImageScore>,
    /// Masks without a prediction, when skipping was requested.
    pub skipped: Vec<String>,
}

impl DatasetReport {
    /// Groups per-image scores; the order of `images` is kept.
    pub fn from_images(dataset: impl Into<String>, images: Vec<ImageScore>, skipped: Vec<String>) -> Self {
        let mut supers: BTreeMap<&str, Vec<&Scores>> = BTreeMap::new();
        let mut subs: BTreeMap<(&str, &str), Vec<&Scores>> = BTreeMap::new();
        for im in &images {
            supers.entry(&im.super_class).or_default().push(&im.scores);
            subs.entry((&im.super_class, &im.sub_class)).or_default().push(&im.scores);
        }
        let super_classes = supers
            .into_iter()
            .map(|(s, v)| ClassReport {
                super_class: s.to_string(),
                sub_class: None,
                report: MetricReport::aggregate(v).expect("non-empty group"),
            })
            .collect();
        let sub_classes = subs
            .into_iter()
            .map(|((s, c), v)| ClassReport {
                super_class: s.to_string(),
                sub_class: Some(c.to_string()),
                report: MetricReport::aggregate(v).expect("non-empty group"),
            })
            .collect();
        Self {
            dataset: dataset.into(),
            overall: MetricReport::aggregate(images.iter().map(|i| &i.scores)),
            super_classes,
            sub_classes,
            images,
            skipped,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EvalOptions {
    /// Skip masks without a prediction instead of failing.
    pub skip_missing: bool,
}

/// Prediction files indexed by lower-cased file stem.
pub fn index_predictions(dir: &Path) -> Result<HashMap<String, PathBuf>> {
    let mut out = HashMap::new();
    for entry in fs::read_dir(dir).map_err(|e| EvalError::io(dir, e))? {
        let path = entry.map_err(|e| EvalError::io(dir, e))?.path();
        if !path.is_file() {
            continue;
        }
        if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
            out.insert(stem.to_lowercase(), path);
        }
    }
    Ok(out)
}

pub fn score_pair(prediction: &GrayMap, mask: &BinaryMask) -> Result<(Scores, bool)> {
    let resized = prediction.dims() != mask.dims();
    let p = prediction.resized(mask.height(), mask.width())?;
    Ok((evaluate(&p, mask)?, resized))
}

pub fn evaluate_dataset(pred_dir: &Path, manifest: &DatasetManifest, opts: EvalOptions) -> Result<DatasetReport> {
    let index = index_predictions(pred_dir)?;
    let mut missing = Vec::new();
    let mut jobs = Vec::new();
    for rec in &manifest.records {
        match index.get(&rec.stem.to_lowercase()) {
            Some(p) => jobs.push((rec, p)),
            None => missing.push(rec.stem.clone()),
        }
    }
    if !missing.is_empty() && !opts.skip_missing {
        return Err(EvalError::MissingPredictions(missing));
    }
    let images = jobs
        .par_iter()
        .map(|(rec, pred)| {
            let p = GrayMap::load_png(pred)?;
            let g = BinaryMask::load_png(&rec.mask)?;
            let (scores, resized) = score_pair(&p, &g)?;
            Ok(ImageScore {
                stem: rec.stem.clone(),
                super_class: rec.super_class.clone(),
                sub_class: rec.sub_class.clone(),
                scores,
                resized,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DatasetReport::from_images(manifest.name.clone(), images, missing))
}
