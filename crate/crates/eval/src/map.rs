//! Prediction maps, ground-truth masks and their PNG forms.

use std::path::Path;

use sinet_tensor::{ops, Tensor};

use crate::error::{EvalError, Result};

/// A row-major map with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl GrayMap {
    /// Clamps into `[0, 1]`; rejects non-finite values.
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        check_len(height, width, values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(EvalError::Value(format!("non-finite prediction at index {i}")));
        }
        let values = values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Ok(Self { height, width, values })
    }

    pub fn constant(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    /// 8-bit gray levels divided by 255.
    pub fn from_u8(height: usize, width: usize, levels: &[u8]) -> Result<Self> {
        Self::new(height, width, levels.iter().map(|&v| v as f64 / 255.0).collect())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Bilinear resize with half-pixel centres.
    pub fn resized(&self, height: usize, width: usize) -> Result<Self> {
        if (height, width) == self.dims() {
            return Ok(self.clone());
        }
        let t = Tensor::new([1, 1, self.height, self.width], self.values.clone())
            .map_err(|e| EvalError::Value(e.to_string()))?;
        let r = ops::resize_bilinear(&t, height, width).map_err(|e| EvalError::Value(e.to_string()))?;
        Self::new(height, width, r.into_data())
    }

    pub fn flipped_horizontal(&self) -> Self {
        Self {
            values: flip_rows(&self.values, self.width),
            ..self.clone()
        }
    }

    /// Rounds to 8-bit levels.
    pub fn to_u8(&self) -> Vec<u8> {
        self.values.iter().map(|v| (v * 255.0).round() as u8).collect()
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| EvalError::image(path, e))?.to_luma8();
        Self::from_u8(img.height() as usize, img.width() as usize, img.as_raw())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let img = image::GrayImage::from_raw(self.width as u32, self.height as u32, self.to_u8())
            .expect("buffer matches dimensions");
        img.save(path).map_err(|e| EvalError::image(path, e))
    }
}

/// A strictly binary row-major mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        check_len(height, width, bits.len())?;
        Ok(Self { height, width, bits })
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let bits = (0..height * width).map(|i| f(i / width, i % width)).collect();
        Self { height, width, bits }
    }

    /// Accepts only exact 0 and 1.
    pub fn from_values(height: usize, width: usize, values: &[f64]) -> Result<Self> {
        let bits = values
            .iter()
            .map(|&v| match v {
                0.0 => Ok(false),
                1.0 => Ok(true),
                other => Err(EvalError::Value(format!("mask value {other} is not binary"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(height, width, bits)
    }

    /// Foreground where the level exceeds 127.
    pub fn from_u8(height: usize, width: usize, levels: &[u8]) -> Result<Self> {
        Self::new(height, width, levels.iter().map(|&v| v > 127).collect())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn foreground(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn ratio(&self) -> f64 {
        self.foreground() as f64 / self.len() as f64
    }

    pub fn to_map(&self) -> GrayMap {
        GrayMap {
            height: self.height,
            width: self.width,
            values: self.bits.iter().map(|&b| b as u8 as f64).collect(),
        }
    }

    pub fn complement(&self) -> Self {
        Self {
            bits: self.bits.iter().map(|b| !b).collect(),
            ..self.clone()
        }
    }

    pub fn flipped_horizontal(&self) -> Self {
        Self {
            bits: flip_rows(&self.bits, self.width),
            ..self.clone()
        }
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| EvalError::image(path, e))?.to_luma8();
        Self::from_u8(img.height() as usize, img.width() as usize, img.as_raw())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let levels = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        let img = image::GrayImage::from_raw(self.width as u32, self.height as u32, levels)
            .expect("buffer matches dimensions");
        img.save(path).map_err(|e| EvalError::image(path, e))
    }
}

fn check_len(height: usize, width: usize, len: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(EvalError::Value(format!("empty {height}x{width} map")));
    }
    if height * width != len {
        return Err(EvalError::Value(format!("{len} values for a {height}x{width} map")));
    }
    Ok(())
}

fn flip_rows<T: Copy>(values: &[T], width: usize) -> Vec<T> {
    values.chunks(width).flat_map(|row| row.iter().rev().copied()).collect()
}

pub(crate) fn check_dims(what: &str, p: (usize, usize), g: (usize, usize)) -> Result<()> {
    if p != g {
        return Err(EvalError::Dimension {
            what: what.to_string(),
            expected: g,
            got: p,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamps_and_rejects() {
        let m = GrayMap::new(1, 3, vec![-0.5, 0.5, 2.0]).unwrap();
        assert_eq!(m.values(), &[0.0, 0.5, 1.0]);
        assert!(GrayMap::new(1, 2, vec![0.0, f64::NAN]).is_err());
        assert!(GrayMap::new(2, 2, vec![0.0; 3]).is_err());
        assert!(BinaryMask::from_values(1, 2, &[0.0, 0.5]).is_err());
        assert_eq!(BinaryMask::from_u8(1, 3, &[127, 128, 255]).unwrap().bits(), &[false, true, true]);
    }

    #[test]
    fn flip_reverses_each_row() {
        let m = BinaryMask::from_fn(2, 3, |r, c| r == 0 && c == 0);
        assert!(m.flipped_horizontal().get(0, 2));
    }
}
