//! Object size, contrast, center bias, resolution and attribute statistics.
//!
//! Per-image values are ordered by file stem, so every statistic is
//! independent of manifest order.

use std::collections::BTreeMap;
use std::path::Path;

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::attributes::{compute_attributes, global_contrast, local_contrast, Attribute, AttributeSet};
use super::{DatasetManifest, Record};
use crate::error::{EvalError, Result};
use crate::map::BinaryMask;

pub const STAT_BINS: usize = 20;
pub const HEATMAP_SIZE: usize = 256;

/// Equal-width bins over `[lo, hi]`; the last bin is closed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn uniform(lo: f64, hi: f64, bins: usize, values: &[f64]) -> Self {
        let mut counts = vec![0; bins];
        for &v in values {
            let t = ((v - lo) / (hi - lo) * bins as f64).floor();
            let i = (t.max(0.0) as usize).min(bins - 1);
            counts[i] += 1;
        }
        Self { lo, hi, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub values: Vec<f64>,
    pub histogram: Histogram,
    pub min: Option<f64>,
    pub mean: Option<f64>,
    pub max: Option<f64>,
}

impl Distribution {
    /// Over `[0, 1]` with [`STAT_BINS`] bins.
    pub fn unit(values: Vec<f64>) -> Self {
        let histogram = Histogram::uniform(0.0, 1.0, STAT_BINS, &values);
        let n = values.len();
        let (min, mean, max) = if n == 0 {
            (None, None, None)
        } else {
            (
                Some(values.iter().copied().fold(f64::INFINITY, f64::min)),
                Some(values.iter().sum::<f64>() / n as f64),
                Some(values.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
            )
        };
        Self {
            values,
            histogram,
            min,
            mean,
            max,
        }
    }
}

/// Mean of all non-empty masks on a common square grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub size: usize,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolutionCount {
    pub width: usize,
    pub height: usize,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeCount {
    pub attribute: Attribute,
    /// Images with the attribute present.
    pub present: usize,
    /// Images for which the attribute is known at all.
    pub known: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub dataset: String,
    pub images: usize,
    pub object_size: Distribution,
    pub global_contrast: Distribution,
    pub local_contrast: Distribution,
    /// Centroid-to-centre distance over the centre-to-corner distance.
    pub center_distance: Distribution,
    pub empty_masks: usize,
    pub resolutions: Vec<ResolutionCount>,
    pub attributes: Vec<AttributeCount>,
    /// `cooccurrence[a][b]`: images where both `a` and `b` are present, in
    /// [`Attribute::ALL`] order.
    pub cooccurrence: Vec<Vec<usize>>,
    #[serde(skip)]
    pub heatmap: Option<Heatmap>,
    pub warnings: Vec<String>,
}

pub fn object_ratio(mask: &BinaryMask) -> f64 {
    mask.ratio()
}

/// `None` for an empty mask. Uses pixel indices, so a single pixel in a
/// corner is at distance 1.
pub fn center_distance(mask: &BinaryMask) -> Option<f64> {
    let (h, w) = mask.dims();
    let area = mask.foreground();
    if area == 0 {
        return None;
    }
    let (mut sr, mut sc) = (0.0, 0.0);
    for r in 0..h {
        for c in 0..w {
            if mask.get(r, c) {
                sr += r as f64;
                sc += c as f64;
            }
        }
    }
    let (cy, cx) = ((h - 1) as f64 / 2.0, (w - 1) as f64 / 2.0);
    let reach = cy.hypot(cx);
    if reach == 0.0 {
        return Some(0.0);
    }
    Some((sr / area as f64 - cy).hypot(sc / area as f64 - cx) / reach)
}

/// The mask resampled onto the heatmap grid.
pub fn heatmap_contribution(mask: &BinaryMask) -> Result<Vec<f64>> {
    Ok(mask.to_map().resized(HEATMAP_SIZE, HEATMAP_SIZE)?.values().to_vec())
}

struct Facts {
    stem: String,
    dims: (usize, usize),
    ratio: f64,
    distance: Option<f64>,
    global: Option<f64>,
    local: Option<f64>,
    attributes: AttributeSet,
    heat: Option<Vec<f64>>,
    has_image: bool,
}

fn load_rgb(path: &Path) -> Result<RgbImage> {
    Ok(image::open(path).map_err(|e| EvalError::image(path, e))?.to_rgb8())
}

fn facts(rec: &Record) -> Result<Facts> {
    let mask = BinaryMask::load_png(&rec.mask)?;
    let image = rec.image.as_deref().map(load_rgb).transpose()?;
    let distance = center_distance(&mask);
    Ok(Facts {
        stem: rec.stem.clone(),
        dims: mask.dims(),
        ratio: object_ratio(&mask),
        global: image.as_ref().and_then(|img| global_contrast(img, &mask)),
        local: image.as_ref().and_then(|img| local_contrast(img, &mask)),
        attributes: compute_attributes(&mask, image.as_ref()).with_annotations(rec.annotated.as_deref()),
        heat: distance.is_some().then(|| heatmap_contribution(&mask)).transpose()?,
        distance,
        has_image: image.is_some(),
    })
}

fn collect(manifest: &DatasetManifest) -> Result<Vec<Facts>> {
    let mut all = manifest.records.par_iter().map(facts).collect::<Result<Vec<_>>>()?;
    all.sort_by(|a, b| a.stem.cmp(&b.stem));
    Ok(all)
}

pub fn dataset_stats(manifest: &DatasetManifest) -> Result<DatasetStats> {
    let facts = collect(manifest)?;
    let mut warnings = manifest.warnings.clone();
    let without_image = facts.iter().filter(|f| !f.has_image).count();
    if without_image > 0 {
        warnings.push(format!("{without_image} records have no image; contrast and IB skipped for them"));
    }
    let empty_masks = facts.iter().filter(|f| f.distance.is_none()).count();
    if empty_masks > 0 {
        warnings.push(format!("{empty_masks} empty masks skipped for center bias"));
    }

    let mut heat_sum = vec![0.0; HEATMAP_SIZE * HEATMAP_SIZE];
    let mut heat_n = 0usize;
    for h in facts.iter().filter_map(|f| f.heat.as_ref()) {
        for (acc, v) in heat_sum.iter_mut().zip(h) {
            *acc += v;
        }
        heat_n += 1;
    }
    let heatmap = (heat_n > 0).then(|| Heatmap {
        size: HEATMAP_SIZE,
        values: heat_sum.into_iter().map(|v| v / heat_n as f64).collect(),
    });

    let mut res: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for f in &facts {
        *res.entry((f.dims.1, f.dims.0)).or_default() += 1;
    }
    let attributes = Attribute::ALL
        .into_iter()
        .map(|a| AttributeCount {
            attribute: a,
            present: facts.iter().filter(|f| f.attributes.get(a) == Some(true)).count(),
            known: facts.iter().filter(|f| f.attributes.get(a).is_some()).count(),
        })
        .collect();
    let mut cooccurrence = vec![vec![0usize; 7]; 7];
    for f in &facts {
        let present = f.attributes.present();
        for a in &present {
            for b in &present {
                cooccurrence[a.index()][b.index()] += 1;
            }
        }
    }
    Ok(DatasetStats {
        dataset: manifest.name.clone(),
        images: facts.len(),
        object_size: Distribution::unit(facts.iter().map(|f| f.ratio).collect()),
        global_contrast: Distribution::unit(facts.iter().filter_map(|f| f.global).collect()),
        local_contrast: Distribution::unit(facts.iter().filter_map(|f| f.local).collect()),
        center_distance: Distribution::unit(facts.iter().filter_map(|f| f.distance).collect()),
        empty_masks,
        resolutions: res
            .into_iter()
            .map(|((width, height), count)| ResolutionCount { width, height, count })
            .collect(),
        attributes,
        cooccurrence,
        heatmap,
        warnings,
    })
}

pub fn object_size_stats(manifest: &DatasetManifest) -> Result<Distribution> {
    Ok(dataset_stats(manifest)?.object_size)
}

/// Global and local contrast; every record needs an image.
pub fn contrast_stats(manifest: &DatasetManifest) -> Result<(Distribution, Distribution)> {
    if let Some(rec) = manifest.records.iter().find(|r| r.image.is_none()) {
        return Err(EvalError::Manifest(format!("{} has no image for contrast statistics", rec.stem)));
    }
    let s = dataset_stats(manifest)?;
    Ok((s.global_contrast, s.local_contrast))
}
