//! Image loading, saving and full-resolution prediction.

use std::fs;
use std::path::{Path, PathBuf};

use sinet_core::{ParamStore, Sinet};
use sinet_eval::{BinaryMask, GrayMap};
use sinet_tensor::ops::{resize_bilinear, sigmoid};
use sinet_tensor::Tensor;

use crate::error::{CliError, Result};

const IMAGE_EXTS: [&str; 5] = ["jpg", "jpeg", "png", "bmp", "tif"];

/// `1 x 3 x H x W` tensor with values in `[0, 1]`.
pub fn load_rgb(path: &Path) -> Result<Tensor> {
    let img = image::open(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raw = img.as_raw();
    Tensor::from_fn([1, 3, h, w], |_, c, y, x| f64::from(raw[(y * w + x) * 3 + c]) / 255.0)
        .map_err(|e| CliError::Validation(e.to_string()))
}

pub fn save_rgb(path: &Path, image: &Tensor) -> Result<()> {
    let s = image.shape();
    let mut buf = vec![0u8; s.height * s.width * 3];
    for y in 0..s.height {
        for x in 0..s.width {
            for c in 0..3 {
                buf[(y * s.width + x) * 3 + c] = (image.at(0, c, y, x).clamp(0.0, 1.0) * 255.0).round() as u8;
            }
        }
    }
    image::save_buffer(path, &buf, s.width as u32, s.height as u32, image::ColorType::Rgb8)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn mask_of(sample_mask: &Tensor) -> Result<BinaryMask> {
    let s = sample_mask.shape();
    Ok(BinaryMask::from_values(s.height, s.width, sample_mask.data())?)
}

/// Probability map of the finest side output at the image's own resolution.
/// The image is resized to `size x size` for the network and the result
/// resized back.
pub fn predict_map(net: &Sinet, store: &ParamStore, image: &Tensor, size: usize) -> Result<GrayMap> {
    let s = image.shape();
    let input = if (s.height, s.width) == (size, size) {
        image.clone()
    } else {
        resize_bilinear(image, size, size).map_err(|e| CliError::Validation(e.to_string()))?
    };
    let side = net.predict(store, &input)?;
    let mut prob = sigmoid(&side.c3_up);
    if (s.height, s.width) != (size, size) {
        prob = resize_bilinear(&prob, s.height, s.width).map_err(|e| CliError::Validation(e.to_string()))?;
    }
    Ok(GrayMap::new(s.height, s.width, prob.data().to_vec())?)
}

/// Exactly the map a reader of the saved 8-bit PNG would see.
pub fn quantized(map: &GrayMap) -> GrayMap {
    GrayMap::from_u8(map.height(), map.width(), &map.to_u8()).expect("same dimensions")
}

/// Image files under `input`, or `input` itself, sorted by path.
pub fn list_images(input: &Path) -> Result<Vec<PathBuf>> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let entries = fs::read_dir(input).map_err(|e| CliError::Io(format!("{}: {e}", input.display())))?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    out.sort();
    Ok(out)
}
