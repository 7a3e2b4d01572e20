//! Per-image challenge attributes.
//!
//! Computed from the mask (and image, for IB): multiple objects, big and
//! small objects, out-of-view, indefinable boundaries. Occlusion and shape
//! complexity come only from annotations.

use std::fmt;
use std::str::FromStr;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::map::BinaryMask;

/// Object area ratio `num / den` at or above which an object is big.
pub const BIG_RATIO: (usize, usize) = (1, 2);
/// Object area ratio at or below which an object is small.
pub const SMALL_RATIO: (usize, usize) = (1, 10);
/// Foreground/background colour distance below which the boundary is
/// indefinable.
pub const BOUNDARY_CHI2: f64 = 0.9;
/// Half-width of the foreground and background bands around the boundary.
pub const BAND_RADIUS: usize = 15;
pub const HIST_BINS: usize = 8;
pub const CHI2_EPS: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Attribute {
    MO,
    BO,
    SO,
    OV,
    OC,
    SC,
    IB,
}

impl Attribute {
    pub const ALL: [Attribute; 7] = [Self::MO, Self::BO, Self::SO, Self::OV, Self::OC, Self::SC, Self::IB];

    pub fn name(self) -> &'static str {
        match self {
            Self::MO => "MO",
            Self::BO => "BO",
            Self::SO => "SO",
            Self::OV => "OV",
            Self::OC => "OC",
            Self::SC => "SC",
            Self::IB => "IB",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn computable(self) -> bool {
        !matches!(self, Self::OC | Self::SC)
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Attribute {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown attribute {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Computed,
    Annotated,
    /// Neither computable here nor annotated.
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeFlag {
    pub value: Option<bool>,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSet {
    flags: [AttributeFlag; 7],
}

impl AttributeSet {
    pub fn get(&self, a: Attribute) -> Option<bool> {
        self.flags[a.index()].value
    }

    pub fn flag(&self, a: Attribute) -> AttributeFlag {
        self.flags[a.index()]
    }

    /// Fills the annotation-only flags from a list of present attributes.
    pub fn with_annotations(mut self, present: Option<&[Attribute]>) -> Self {
        if let Some(list) = present {
            for a in [Attribute::OC, Attribute::SC] {
                self.flags[a.index()] = AttributeFlag {
                    value: Some(list.contains(&a)),
                    provenance: Provenance::Annotated,
                };
            }
        }
        self
    }

    pub fn present(&self) -> Vec<Attribute> {
        Attribute::ALL.into_iter().filter(|&a| self.get(a) == Some(true)).collect()
    }
}

/// Number of 4-connected foreground components.
pub fn count_components(mask: &BinaryMask) -> usize {
    let (h, w) = mask.dims();
    let mut seen = vec![false; h * w];
    let mut stack = Vec::new();
    let mut count = 0;
    for start in 0..h * w {
        if !mask.bits()[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (r, c) = (i / w, i % w);
            let mut visit = |j: usize| {
                if mask.bits()[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            };
            if r > 0 {
                visit(i - w);
            }
            if r + 1 < h {
                visit(i + w);
            }
            if c > 0 {
                visit(i - 1);
            }
            if c + 1 < w {
                visit(i + 1);
            }
        }
    }
    count
}

pub fn touches_border(mask: &BinaryMask) -> bool {
    let (h, w) = mask.dims();
    (0..w).any(|c| mask.get(0, c) || mask.get(h - 1, c)) || (0..h).any(|r| mask.get(r, 0) || mask.get(r, w - 1))
}

/// Whether any pixel in the `(2r+1)^2` window (clipped to the image) is set.
fn window_any(bits: &[bool], h: usize, w: usize, r: usize) -> Vec<bool> {
    let pass = |src: &[bool], len: usize, stride: usize, lines: usize, line_stride: usize| {
        let mut dst = vec![false; src.len()];
        for l in 0..lines {
            let at = |i: usize| src[l * line_stride + i * stride] as usize;
            let mut prefix = vec![0usize; len + 1];
            for i in 0..len {
                prefix[i + 1] = prefix[i] + at(i);
            }
            for i in 0..len {
                let lo = i.saturating_sub(r);
                let hi = (i + r + 1).min(len);
                dst[l * line_stride + i * stride] = prefix[hi] > prefix[lo];
            }
        }
        dst
    };
    let rows = pass(bits, w, 1, h, w);
    pass(&rows, h, w, w, 1)
}

pub fn dilate(mask: &BinaryMask, radius: usize) -> BinaryMask {
    let (h, w) = mask.dims();
    BinaryMask::new(h, w, window_any(mask.bits(), h, w, radius)).expect("same dims")
}

/// Pixels outside the image do not erode.
pub fn erode(mask: &BinaryMask, radius: usize) -> BinaryMask {
    let (h, w) = mask.dims();
    let inv: Vec<bool> = mask.bits().iter().map(|b| !b).collect();
    let grown = window_any(&inv, h, w, radius);
    BinaryMask::new(h, w, grown.into_iter().map(|b| !b).collect()).expect("same dims")
}

/// Inner band (mask minus its erosion) and outer band (dilation minus mask).
pub fn boundary_bands(mask: &BinaryMask, radius: usize) -> (BinaryMask, BinaryMask) {
    let (h, w) = mask.dims();
    let inner = erode(mask, radius);
    let outer = dilate(mask, radius);
    let fg = (0..h * w).map(|i| mask.bits()[i] && !inner.bits()[i]).collect();
    let bg = (0..h * w).map(|i| outer.bits()[i] && !mask.bits()[i]).collect();
    (
        BinaryMask::new(h, w, fg).expect("same dims"),
        BinaryMask::new(h, w, bg).expect("same dims"),
    )
}

/// Normalized 8x8x8 joint RGB histogram of the selected pixels; `None` if
/// nothing is selected.
pub fn rgb_histogram(image: &RgbImage, select: &BinaryMask) -> Option<Vec<f64>> {
    let bin = |v: u8| v as usize * HIST_BINS / 256;
    let mut hist = vec![0.0; HIST_BINS * HIST_BINS * HIST_BINS];
    let mut n = 0usize;
    for (i, px) in image.pixels().enumerate() {
        if select.bits()[i] {
            let [r, g, b] = px.0;
            hist[(bin(r) * HIST_BINS + bin(g)) * HIST_BINS + bin(b)] += 1.0;
            n += 1;
        }
    }
    (n > 0).then(|| hist.into_iter().map(|v| v / n as f64).collect())
}

/// `1/2 * sum (h1 - h2)^2 / (h1 + h2 + eps)`.
pub fn chi_square(h1: &[f64], h2: &[f64]) -> f64 {
    0.5 * h1
        .iter()
        .zip(h2)
        .map(|(a, b)| (a - b) * (a - b) / (a + b + CHI2_EPS))
        .sum::<f64>()
}

fn check_image(image: &RgbImage, mask: &BinaryMask) -> bool {
    (image.height() as usize, image.width() as usize) == mask.dims()
}

/// Foreground versus background colour distance.
pub fn global_contrast(image: &RgbImage, mask: &BinaryMask) -> Option<f64> {
    if !check_image(image, mask) {
        return None;
    }
    Some(chi_square(&rgb_histogram(image, mask)?, &rgb_histogram(image, &mask.complement())?))
}

/// Colour distance between the two bands around the boundary.
pub fn local_contrast(image: &RgbImage, mask: &BinaryMask) -> Option<f64> {
    if !check_image(image, mask) {
        return None;
    }
    let (fg, bg) = boundary_bands(mask, BAND_RADIUS);
    Some(chi_square(&rgb_histogram(image, &fg)?, &rgb_histogram(image, &bg)?))
}

fn computed(value: bool) -> AttributeFlag {
    AttributeFlag {
        value: Some(value),
        provenance: Provenance::Computed,
    }
}

const UNKNOWN: AttributeFlag = AttributeFlag {
    value: None,
    provenance: Provenance::Unknown,
};

/// IB needs the image; without one, or when a band is empty, it is unknown.
pub fn compute_attributes(mask: &BinaryMask, image: Option<&RgbImage>) -> AttributeSet {
    let area = mask.foreground();
    let total = mask.len();
    let mut flags = [UNKNOWN; 7];
    if area == 0 {
        for a in Attribute::ALL.into_iter().filter(|a| a.computable()) {
            flags[a.index()] = computed(false);
        }
        return AttributeSet { flags };
    }
    flags[Attribute::MO.index()] = computed(count_components(mask) >= 2);
    flags[Attribute::BO.index()] = computed(area * BIG_RATIO.1 >= total * BIG_RATIO.0);
    flags[Attribute::SO.index()] = computed(area * SMALL_RATIO.1 <= total * SMALL_RATIO.0);
    flags[Attribute::OV.index()] = computed(touches_border(mask));
    if let Some(c) = image.and_then(|img| local_contrast(img, mask)) {
        flags[Attribute::IB.index()] = computed(c < BOUNDARY_CHI2);
    }
    AttributeSet { flags }
}
