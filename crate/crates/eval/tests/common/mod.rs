#![allow(dead_code)]

use std::fs;
use std::path::Path;

use image::{Rgb, RgbImage};
use sinet_eval::BinaryMask;

pub fn write_pair(root: &Path, stem: &str, mask: &BinaryMask, color: impl Fn(usize, usize, bool) -> [u8; 3]) {
    fs::create_dir_all(root.join("Imgs")).unwrap();
    fs::create_dir_all(root.join("GT")).unwrap();
    mask.save_png(&root.join("GT").join(format!("{stem}.png"))).unwrap();
    let (h, w) = mask.dims();
    let img = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let (r, c) = (y as usize, x as usize);
        Rgb(color(r, c, mask.get(r, c)))
    });
    img.save(root.join("Imgs").join(format!("{stem}.jpg"))).unwrap();
}

pub fn block(h: usize, w: usize, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> BinaryMask {
    BinaryMask::from_fn(h, w, |r, c| rows.contains(&r) && cols.contains(&c))
}
