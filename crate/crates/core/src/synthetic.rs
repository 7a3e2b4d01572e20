//! Seeded toy data: low-contrast elliptical blobs on a striped, noisy
//! background.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sinet_tensor::Tensor;

use crate::train::Sample;

#[derive(Clone, Debug, PartialEq)]
pub struct BlobConfig {
    pub count: usize,
    pub size: usize,
    /// Colour offset between object and background.
    pub contrast: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for BlobConfig {
    fn default() -> Self {
        Self {
            count: 32,
            size: 64,
            contrast: 0.18,
            noise: 0.06,
            seed: 7,
        }
    }
}

struct Stripes {
    fx: f64,
    fy: f64,
    phase: f64,
    amp: f64,
}

impl Stripes {
    fn random(rng: &mut ChaCha8Rng, amp: f64) -> Self {
        let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let freq: f64 = rng.random_range(0.3..0.7);
        Self {
            fx: freq * angle.cos(),
            fy: freq * angle.sin(),
            phase: rng.random_range(0.0..std::f64::consts::TAU),
            amp,
        }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        self.amp * (self.fx * x + self.fy * y + self.phase).sin()
    }
}

pub fn blob_sample(cfg: &BlobConfig, rng: &mut ChaCha8Rng) -> Sample {
    let n = cfg.size;
    let nf = n as f64;
    let base: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.35..0.6));
    let mut shift = [0.0; 3];
    let channel = rng.random_range(0..3);
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    shift[channel] = sign * cfg.contrast;
    shift[(channel + 1) % 3] = -0.5 * sign * cfg.contrast;
    let background = Stripes::random(rng, 0.1);
    let foreground = Stripes::random(rng, 0.1);

    let cx = rng.random_range(0.3..0.7) * nf;
    let cy = rng.random_range(0.3..0.7) * nf;
    let ra = rng.random_range(0.12..0.25) * nf;
    let rb = rng.random_range(0.12..0.25) * nf;
    let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
    let (st, ct) = theta.sin_cos();

    let mut mask = vec![0.0; n * n];
    for y in 0..n {
        for x in 0..n {
            let dx = x as f64 + 0.5 - cx;
            let dy = y as f64 + 0.5 - cy;
            let u = (dx * ct + dy * st) / ra;
            let v = (-dx * st + dy * ct) / rb;
            if u * u + v * v <= 1.0 {
                mask[y * n + x] = 1.0;
            }
        }
    }
    let mut image = vec![0.0; 3 * n * n];
    for y in 0..n {
        for x in 0..n {
            let inside = mask[y * n + x] == 1.0;
            let tex = if inside { &foreground } else { &background };
            let t = tex.at(x as f64, y as f64);
            for c in 0..3 {
                let noise = rng.random_range(-cfg.noise..cfg.noise);
                let offset = if inside { shift[c] } else { 0.0 };
                image[(c * n + y) * n + x] = (base[c] + offset + t + noise).clamp(0.0, 1.0);
            }
        }
    }
    Sample {
        image: Tensor::new([1, 3, n, n], image).expect("finite image"),
        mask: Tensor::new([1, 1, n, n], mask).expect("binary mask"),
    }
}

pub fn blob_dataset(cfg: &BlobConfig) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.count).map(|_| blob_sample(cfg, &mut rng)).collect()
}
