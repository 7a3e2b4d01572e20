//! Literal, loop-by-loop transcriptions of the four benchmark metrics.
//!
//! Every function takes a row-major prediction in `[0, 1]` and a boolean
//! ground truth of the same `height x width`. Nothing here is shared with the
//! production implementations; speed is irrelevant.

const EPS: f64 = 2.2204e-16;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn mae(p: &[f64], g: &[bool]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        s += (p[i] - if g[i] { 1.0 } else { 0.0 }).abs();
    }
    s / p.len() as f64
}

// ---------------------------------------------------------------- S-measure

fn object_score(values: &[f64]) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    let x = mean(values);
    let sigma = if n < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - x) * (v - x)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    2.0 * x / (x * x + 1.0 + sigma + EPS)
}

fn s_object(p: &[f64], g: &[bool]) -> f64 {
    let fg: Vec<f64> = (0..p.len()).filter(|&i| g[i]).map(|i| p[i]).collect();
    let bg: Vec<f64> = (0..p.len()).filter(|&i| !g[i]).map(|i| 1.0 - p[i]).collect();
    let u = fg.len() as f64 / p.len() as f64;
    u * object_score(&fg) + (1.0 - u) * object_score(&bg)
}

fn quadrant_ssim(p: &[f64], g: &[f64]) -> f64 {
    let n = p.len() as f64;
    let x = mean(p);
    let y = mean(g);
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxy = 0.0;
    for i in 0..p.len() {
        sx += (p[i] - x) * (p[i] - x);
        sy += (g[i] - y) * (g[i] - y);
        sxy += (p[i] - x) * (g[i] - y);
    }
    let sx = sx / (n - 1.0 + EPS);
    let sy = sy / (n - 1.0 + EPS);
    let sxy = sxy / (n - 1.0 + EPS);
    let alpha = 4.0 * x * y * sxy;
    let beta = (x * x + y * y) * (sx + sy);
    if alpha != 0.0 {
        alpha / (beta + EPS)
    } else if beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

fn s_region(h: usize, w: usize, p: &[f64], g: &[bool]) -> f64 {
    let total = g.iter().filter(|&&b| b).count() as f64;
    // 1-based centroid, rounded half away from zero
    let mut sx = 0.0;
    let mut sy = 0.0;
    for r in 0..h {
        for c in 0..w {
            if g[r * w + c] {
                sx += (c + 1) as f64;
                sy += (r + 1) as f64;
            }
        }
    }
    let cx = (sx / total).round() as usize;
    let cy = (sy / total).round() as usize;
    let quadrants = [(0, cy, 0, cx), (0, cy, cx, w), (cy, h, 0, cx), (cy, h, cx, w)];
    let mut q = 0.0;
    for (r0, r1, c0, c1) in quadrants {
        let mut pv = Vec::new();
        let mut gv = Vec::new();
        for r in r0..r1 {
            for c in c0..c1 {
                pv.push(p[r * w + c]);
                gv.push(if g[r * w + c] { 1.0 } else { 0.0 });
            }
        }
        if pv.is_empty() {
            continue;
        }
        let weight = pv.len() as f64 / (h * w) as f64;
        q += weight * quadrant_ssim(&pv, &gv);
    }
    q
}

pub fn s_measure(h: usize, w: usize, p: &[f64], g: &[bool]) -> f64 {
    let y = g.iter().filter(|&&b| b).count() as f64 / g.len() as f64;
    if y == 0.0 {
        return 1.0 - mean(p);
    }
    if y == 1.0 {
        return mean(p);
    }
    let q = 0.5 * s_object(p, g) + 0.5 * s_region(h, w, p, g);
    q.max(0.0)
}

// ---------------------------------------------------------------- E-measure

fn enhanced_alignment(fm: &[bool], g: &[bool]) -> f64 {
    let n = g.len();
    let dfm: Vec<f64> = fm.iter().map(|&b| b as u8 as f64).collect();
    let dgt: Vec<f64> = g.iter().map(|&b| b as u8 as f64).collect();
    let enhanced: Vec<f64> = if dgt.iter().sum::<f64>() == 0.0 {
        dfm.iter().map(|v| 1.0 - v).collect()
    } else if dgt.iter().all(|&v| v == 1.0) {
        dfm.clone()
    } else {
        let mu_fm = mean(&dfm);
        let mu_gt = mean(&dgt);
        (0..n)
            .map(|i| {
                let a = dfm[i] - mu_fm;
                let b = dgt[i] - mu_gt;
                let align = 2.0 * a * b / (a * a + b * b + EPS);
                (align + 1.0) * (align + 1.0) / 4.0
            })
            .collect()
    };
    enhanced.iter().sum::<f64>() / n as f64
}

/// Mean over the 256 thresholds `k / 255`, binarizing `p >= t`.
pub fn e_measure_mean(p: &[f64], g: &[bool]) -> f64 {
    let mut s = 0.0;
    for k in 0..256 {
        let t = k as f64 / 255.0;
        let fm: Vec<bool> = p.iter().map(|&v| v >= t).collect();
        s += enhanced_alignment(&fm, g);
    }
    s / 256.0
}

// ------------------------------------------------------- weighted F-measure

fn gaussian_7x7() -> [[f64; 7]; 7] {
    let mut k = [[0.0; 7]; 7];
    let mut total = 0.0;
    for (i, row) in k.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (y, x) = (i as f64 - 3.0, j as f64 - 3.0);
            *v = (-(x * x + y * y) / (2.0 * 25.0)).exp();
            total += *v;
        }
    }
    for row in k.iter_mut() {
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    k
}

/// Nearest foreground pixel by brute force: minimal squared distance, then
/// minimal row, then minimal column.
fn nearest_foreground(h: usize, w: usize, g: &[bool], r: usize, c: usize) -> (f64, usize) {
    let mut best: Option<(usize, usize, usize)> = None;
    for rr in 0..h {
        for cc in 0..w {
            if !g[rr * w + cc] {
                continue;
            }
            let d2 = rr.abs_diff(r).pow(2) + cc.abs_diff(c).pow(2);
            let cand = (d2, rr, cc);
            if best.is_none_or(|b| cand < b) {
                best = Some(cand);
            }
        }
    }
    let (d2, rr, cc) = best.expect("non-empty foreground");
    ((d2 as f64).sqrt(), rr * w + cc)
}

pub fn weighted_f_measure(h: usize, w: usize, p: &[f64], g: &[bool]) -> f64 {
    if !g.iter().any(|&b| b) {
        return 0.0;
    }
    let n = h * w;
    let e: Vec<f64> = (0..n).map(|i| (p[i] - if g[i] { 1.0 } else { 0.0 }).abs()).collect();
    let mut dist = vec![0.0; n];
    let mut et = e.clone();
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if !g[i] {
                let (d, j) = nearest_foreground(h, w, g, r, c);
                dist[i] = d;
                et[i] = e[j];
            }
        }
    }
    let k = gaussian_7x7();
    let mut ea = vec![0.0; n];
    for r in 0..h as i64 {
        for c in 0..w as i64 {
            let mut s = 0.0;
            for i in 0..7i64 {
                for j in 0..7i64 {
                    let (rr, cc) = (r + i - 3, c + j - 3);
                    if rr >= 0 && rr < h as i64 && cc >= 0 && cc < w as i64 {
                        s += k[i as usize][j as usize] * et[(rr * w as i64 + cc) as usize];
                    }
                }
            }
            ea[(r * w as i64 + c) as usize] = s;
        }
    }
    let mut ew = vec![0.0; n];
    for i in 0..n {
        let min_e = if g[i] && ea[i] < e[i] { ea[i] } else { e[i] };
        let b = if g[i] { 1.0 } else { 2.0 - (0.5f64.ln() / 5.0 * dist[i]).exp() };
        ew[i] = min_e * b;
    }
    let fg_count = g.iter().filter(|&&b| b).count() as f64;
    let mut fg_err = 0.0;
    let mut fpw = 0.0;
    for i in 0..n {
        if g[i] {
            fg_err += ew[i];
        } else {
            fpw += ew[i];
        }
    }
    let tpw = fg_count - fg_err;
    let recall = 1.0 - fg_err / fg_count;
    let precision = tpw / (EPS + tpw + fpw);
    2.0 * recall * precision / (EPS + recall + precision)
}


// ------------------------------------------------------------ sweep inputs

/// The `index`-th binary 3x3 mask, bit `i` of `index` being pixel `i`.
pub fn mask_3x3(index: usize) -> Vec<bool> {
    (0..9).map(|i| index >> i & 1 == 1).collect()
}

/// Sixteen quantized prediction patterns for a 3x3 mask: constants,
/// copies and complements of the mask, ramps and textures. Values are
/// multiples of 1/255, so they sit exactly on binarization thresholds.
pub fn prediction_patterns(g: &[bool]) -> Vec<Vec<f64>> {
    let q = |k: u32| k as f64 / 255.0;
    let from = |f: &dyn Fn(usize, bool) -> u32| -> Vec<f64> { g.iter().enumerate().map(|(i, &b)| q(f(i, b))).collect() };
    vec![
        from(&|_, _| 0),
        from(&|_, _| 255),
        from(&|_, _| 128),
        from(&|_, _| 1),
        from(&|_, b| if b { 255 } else { 0 }),
        from(&|_, b| if b { 0 } else { 255 }),
        from(&|_, b| if b { 204 } else { 51 }),
        from(&|_, b| if b { 128 } else { 127 }),
        from(&|i, _| (i as u32) * 31),
        from(&|i, _| 255 - (i as u32) * 31),
        from(&|i, _| (i / 3) as u32 * 120),
        from(&|i, _| (i % 3) as u32 * 127),
        from(&|i, _| if i % 2 == 0 { 255 } else { 0 }),
        from(&|i, b| if i == 4 { 255 - 255 * b as u32 } else { 255 * b as u32 }),
        from(&|i, b| ((i as u32 * 97 + 13 * b as u32) * 53) % 256),
        from(&|i, b| if b { 150 + i as u32 * 11 } else { i as u32 * 17 }),
    ]
}
