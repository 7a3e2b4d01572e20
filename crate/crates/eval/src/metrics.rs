//! MAE, S-measure, mean E-measure and weighted F-measure.
//!
//! Degenerate ground truths follow the public evaluation toolkits:
//!
//! * S-measure: an all-background mask scores `1 - mean(P)`, an
//!   all-foreground mask scores `mean(P)`. A quadrant left empty by the
//!   centroid split contributes nothing.
//! * E-measure: with an all-background mask the enhanced alignment of a
//!   binarized map is `1 - FM`, with an all-foreground mask it is `FM`, so a
//!   threshold whose binarized map matches the mask scores 1. Scores are
//!   averaged over the N pixels.
//! * Weighted F-measure: an all-background mask scores 0.

use serde::{Deserialize, Serialize};

use crate::map::{check_dims, BinaryMask, GrayMap};
use crate::error::Result;

/// MATLAB `eps`, as used by the reference implementations.
pub const EPS: f64 = 2.2204e-16;
/// Weight of the object term in the S-measure.
pub const S_ALPHA: f64 = 0.5;
/// Thresholds `k / (E_LEVELS - 1)` for `k = 0..E_LEVELS`.
pub const E_LEVELS: usize = 256;
/// Side of the Gaussian dependency window of the weighted F-measure.
pub const WF_WINDOW: usize = 7;
pub const WF_SIGMA: f64 = 5.0;
/// Background importance is `2 - exp(WF_DECAY * distance)`.
pub const WF_DECAY: f64 = -std::f64::consts::LN_2 / 5.0;
pub const WF_BETA2: f64 = 1.0;

/// The four benchmark scores of one prediction, or means over several.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub s_alpha: f64,
    pub e_phi: f64,
    pub f_beta_w: f64,
    pub mae: f64,
}

impl Scores {
    pub fn as_array(&self) -> [f64; 4] {
        [self.s_alpha, self.e_phi, self.f_beta_w, self.mae]
    }
}

pub fn mae(p: &GrayMap, g: &BinaryMask) -> Result<f64> {
    check_dims("mae", p.dims(), g.dims())?;
    let s: f64 = p
        .values()
        .iter()
        .zip(g.bits())
        .map(|(&v, &b)| if b { 1.0 - v } else { v })
        .sum();
    Ok(s / g.len() as f64)
}

pub fn evaluate(p: &GrayMap, g: &BinaryMask) -> Result<Scores> {
    Ok(Scores {
        s_alpha: s_measure(p, g)?,
        e_phi: e_measure_mean(p, g)?,
        f_beta_w: weighted_f_measure(p, g)?,
        mae: mae(p, g)?,
    })
}

// ---------------------------------------------------------------------------

#[derive(Default)]
struct Moments {
    n: f64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n
    }

    /// Sample standard deviation, 0 below two values.
    fn std(&self) -> f64 {
        if self.n < 2.0 {
            return 0.0;
        }
        let m = self.mean();
        ((self.sum_sq - self.n * m * m).max(0.0) / (self.n - 1.0)).sqrt()
    }
}

fn object_similarity(m: &Moments) -> f64 {
    if m.n == 0.0 {
        return 0.0;
    }
    let x = m.mean();
    2.0 * x / (x * x + 1.0 + m.std() + EPS)
}

fn region_ssim(p: &GrayMap, g: &BinaryMask, rows: (usize, usize), cols: (usize, usize)) -> f64 {
    let w = p.width();
    let n = ((rows.1 - rows.0) * (cols.1 - cols.0)) as f64;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for r in rows.0..rows.1 {
        for c in cols.0..cols.1 {
            sx += p.values()[r * w + c];
            sy += g.bits()[r * w + c] as u8 as f64;
        }
    }
    let (mx, my) = (sx / n, sy / n);
    let mut vx = 0.0;
    let mut vy = 0.0;
    let mut cxy = 0.0;
    for r in rows.0..rows.1 {
        for c in cols.0..cols.1 {
            let dx = p.values()[r * w + c] - mx;
            let dy = g.bits()[r * w + c] as u8 as f64 - my;
            vx += dx * dx;
            vy += dy * dy;
            cxy += dx * dy;
        }
    }
    let denom = n - 1.0 + EPS;
    let alpha = 4.0 * mx * my * (cxy / denom);
    let beta = (mx * mx + my * my) * ((vx + vy) / denom);
    if alpha != 0.0 {
        alpha / (beta + EPS)
    } else if beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

pub fn s_measure(p: &GrayMap, g: &BinaryMask) -> Result<f64> {
    check_dims("s_measure", p.dims(), g.dims())?;
    let (h, w) = g.dims();
    let n = (h * w) as f64;
    let mut fg = Moments::default();
    let mut bg = Moments::default();
    let mut row_sum = 0.0;
    let mut col_sum = 0.0;
    for (i, (&v, &b)) in p.values().iter().zip(g.bits()).enumerate() {
        if b {
            fg.push(v);
            row_sum += (i / w + 1) as f64;
            col_sum += (i % w + 1) as f64;
        } else {
            bg.push(1.0 - v);
        }
    }
    if fg.n == 0.0 {
        return Ok(bg.mean());
    }
    if bg.n == 0.0 {
        return Ok(fg.mean());
    }
    let u = fg.n / n;
    let object = u * object_similarity(&fg) + (1.0 - u) * object_similarity(&bg);

    let cy = (row_sum / fg.n).round() as usize;
    let cx = (col_sum / fg.n).round() as usize;
    let mut region = 0.0;
    for rows in [(0, cy), (cy, h)] {
        for cols in [(0, cx), (cx, w)] {
            let area = (rows.1 - rows.0) * (cols.1 - cols.0);
            if area > 0 {
                region += area as f64 / n * region_ssim(p, g, rows, cols);
            }
        }
    }
    Ok((S_ALPHA * object + (1.0 - S_ALPHA) * region).max(0.0))
}

// ---------------------------------------------------------------------------

/// Number of thresholds `k / 255` not exceeding `v`, minus one.
fn level_index(v: f64) -> usize {
    let top = (E_LEVELS - 1) as f64;
    let mut k = (v * top).floor() as usize;
    while k + 1 < E_LEVELS && (k + 1) as f64 / top <= v {
        k += 1;
    }
    while k > 0 && k as f64 / top > v {
        k -= 1;
    }
    k
}

fn enhanced(fm: f64, mu_fm: f64, gt: f64, mu_gt: f64) -> f64 {
    let a = fm - mu_fm;
    let b = gt - mu_gt;
    let align = 2.0 * a * b / (a * a + b * b + EPS);
    (align + 1.0) * (align + 1.0) / 4.0
}

pub fn e_measure_mean(p: &GrayMap, g: &BinaryMask) -> Result<f64> {
    check_dims("e_measure", p.dims(), g.dims())?;
    // pixels per (gt, highest passed threshold) bin; every value passes t = 0
    let mut hist = [[0usize; E_LEVELS]; 2];
    for (&v, &b) in p.values().iter().zip(g.bits()) {
        hist[b as usize][level_index(v)] += 1;
    }
    let n = g.len() as f64;
    let fg_total: usize = hist[1].iter().sum();
    let bg_total: usize = hist[0].iter().sum();
    let mu_gt = fg_total as f64 / n;
    let mut passed_fg = fg_total;
    let mut passed_bg = bg_total;
    let mut total = 0.0;
    for k in 0..E_LEVELS {
        let (tp, fp) = (passed_fg as f64, passed_bg as f64);
        let (fn_, tn) = ((fg_total - passed_fg) as f64, (bg_total - passed_bg) as f64);
        let score = if fg_total == 0 {
            tn
        } else if bg_total == 0 {
            tp
        } else {
            let mu_fm = (tp + fp) / n;
            tp * enhanced(1.0, mu_fm, 1.0, mu_gt)
                + fp * enhanced(1.0, mu_fm, 0.0, mu_gt)
                + fn_ * enhanced(0.0, mu_fm, 1.0, mu_gt)
                + tn * enhanced(0.0, mu_fm, 0.0, mu_gt)
        };
        total += score / n;
        passed_fg -= hist[1][k];
        passed_bg -= hist[0][k];
    }
    Ok(total / E_LEVELS as f64)
}

// ---------------------------------------------------------------------------

/// Euclidean distance to the nearest foreground pixel and that pixel's
/// index, ties broken by smaller row then smaller column.
pub fn distance_transform(g: &BinaryMask) -> Vec<(f64, usize)> {
    let (h, w) = g.dims();
    // nearest foreground row within each column
    let mut col_best: Vec<Option<usize>> = vec![None; h * w];
    for c in 0..w {
        let mut last: Option<usize> = None;
        for r in 0..h {
            if g.get(r, c) {
                last = Some(r);
            }
            col_best[r * w + c] = last;
        }
        let mut next: Option<usize> = None;
        for r in (0..h).rev() {
            if g.get(r, c) {
                next = Some(r);
            }
            let up = col_best[r * w + c];
            col_best[r * w + c] = match (up, next) {
                (Some(a), Some(b)) => Some(if r - a <= b - r { a } else { b }),
                (a, b) => a.or(b),
            };
        }
    }
    let mut out = vec![(f64::INFINITY, usize::MAX); h * w];
    for r in 0..h {
        for c in 0..w {
            let mut best: Option<(usize, usize, usize)> = None;
            for cc in 0..w {
                if let Some(rr) = col_best[r * w + cc] {
                    let cand = (rr.abs_diff(r).pow(2) + cc.abs_diff(c).pow(2), rr, cc);
                    if best.is_none_or(|b| cand < b) {
                        best = Some(cand);
                    }
                }
            }
            if let Some((d2, rr, cc)) = best {
                out[r * w + c] = ((d2 as f64).sqrt(), rr * w + cc);
            }
        }
    }
    out
}

fn gaussian_taps() -> [f64; WF_WINDOW] {
    let half = (WF_WINDOW / 2) as f64;
    let mut taps = [0.0; WF_WINDOW];
    for (i, t) in taps.iter_mut().enumerate() {
        let x = i as f64 - half;
        *t = (-(x * x) / (2.0 * WF_SIGMA * WF_SIGMA)).exp();
    }
    let s: f64 = taps.iter().sum();
    taps.map(|t| t / s)
}

/// Zero-padded separable correlation with the normalized Gaussian window.
fn gaussian_filter(values: &[f64], h: usize, w: usize) -> Vec<f64> {
    let taps = gaussian_taps();
    let half = WF_WINDOW / 2;
    let pass = |src: &[f64], len: usize, stride: usize, lines: usize, line_stride: usize| {
        let mut dst = vec![0.0; src.len()];
        for l in 0..lines {
            for i in 0..len {
                let mut s = 0.0;
                for (k, &t) in taps.iter().enumerate() {
                    let j = i + k;
                    if j >= half && j - half < len {
                        s += t * src[l * line_stride + (j - half) * stride];
                    }
                }
                dst[l * line_stride + i * stride] = s;
            }
        }
        dst
    };
    let rows = pass(values, w, 1, h, w);
    pass(&rows, h, w, w, 1)
}

pub fn weighted_f_measure(p: &GrayMap, g: &BinaryMask) -> Result<f64> {
    check_dims("weighted_f_measure", p.dims(), g.dims())?;
    let fg_count = g.foreground();
    if fg_count == 0 {
        return Ok(0.0);
    }
    let (h, w) = g.dims();
    let err: Vec<f64> = p
        .values()
        .iter()
        .zip(g.bits())
        .map(|(&v, &b)| if b { 1.0 - v } else { v })
        .collect();
    let dt = distance_transform(g);
    let spread: Vec<f64> = (0..h * w)
        .map(|i| if g.bits()[i] { err[i] } else { err[dt[i].1] })
        .collect();
    let smoothed = gaussian_filter(&spread, h, w);
    let mut fg_err = 0.0;
    let mut fp = 0.0;
    for i in 0..h * w {
        if g.bits()[i] {
            fg_err += err[i].min(smoothed[i]);
        } else {
            fp += err[i] * (2.0 - (WF_DECAY * dt[i].0).exp());
        }
    }
    let tp = fg_count as f64 - fg_err;
    let recall = 1.0 - fg_err / fg_count as f64;
    let precision = tp / (EPS + tp + fp);
    Ok((1.0 + WF_BETA2) * recall * precision / (EPS + recall + WF_BETA2 * precision))
}
