mod common;

use std::fs;

use common::{block, write_pair};
use image::{Rgb, RgbImage};
use sinet_eval::dataset::attributes::{chi_square, global_contrast, local_contrast, rgb_histogram};
use sinet_eval::dataset::stats::{center_distance, dataset_stats, Histogram};
use sinet_eval::dataset::{compute_attributes, load_manifest, Attribute, Provenance};
use sinet_eval::{BinaryMask, DatasetManifest};

fn ratio_mask(area: usize) -> BinaryMask {
    BinaryMask::from_fn(10, 10, |r, c| r * 10 + c < area)
}

#[test]
fn size_thresholds_are_inclusive() {
    let cases = [(50, true, false), (49, false, false), (10, false, true), (11, false, false)];
    for (area, big, small) in cases {
        let a = compute_attributes(&ratio_mask(area), None);
        assert_eq!(a.get(Attribute::BO), Some(big), "area {area}");
        assert_eq!(a.get(Attribute::SO), Some(small), "area {area}");
    }
    let full = compute_attributes(&BinaryMask::from_fn(6, 6, |_, _| true), None);
    assert_eq!(full.get(Attribute::BO), Some(true));
}

#[test]
fn object_structure_attributes() {
    let mut dot = BinaryMask::from_fn(100, 100, |r, c| (r, c) == (50, 50));
    let a = compute_attributes(&dot, None);
    assert_eq!(a.get(Attribute::SO), Some(true));
    assert_eq!(a.get(Attribute::MO), Some(false));
    assert_eq!(a.get(Attribute::OV), Some(false));
    assert_eq!(a.get(Attribute::IB), None);
    assert_eq!(a.flag(Attribute::OC).provenance, Provenance::Unknown);

    let two = BinaryMask::from_fn(20, 20, |r, c| (2..7).contains(&r) && ((2..7).contains(&c) || (10..15).contains(&c)));
    assert_eq!(compute_attributes(&two, None).get(Attribute::MO), Some(true));
    dot = BinaryMask::from_fn(8, 8, |r, c| (r, c) == (0, 3));
    assert_eq!(compute_attributes(&dot, None).get(Attribute::OV), Some(true));

    let empty = compute_attributes(&BinaryMask::from_fn(5, 5, |_, _| false), None);
    for a in [Attribute::MO, Attribute::BO, Attribute::SO, Attribute::OV, Attribute::IB] {
        assert_eq!(empty.get(a), Some(false));
    }
    let annotated = empty.with_annotations(Some(&[Attribute::OC]));
    assert_eq!(annotated.get(Attribute::OC), Some(true));
    assert_eq!(annotated.get(Attribute::SC), Some(false));
    assert_eq!(annotated.flag(Attribute::SC).provenance, Provenance::Annotated);
}

#[test]
fn chi_square_extremes() {
    let mask = block(40, 40, 10..30, 10..30);
    let same = RgbImage::from_pixel(40, 40, Rgb([90, 120, 30]));
    assert_eq!(global_contrast(&same, &mask), Some(0.0));
    let split = RgbImage::from_fn(40, 40, |x, y| if mask.get(y as usize, x as usize) { Rgb([255, 0, 0]) } else { Rgb([0, 0, 255]) });
    assert!((global_contrast(&split, &mask).unwrap() - 1.0).abs() < 1e-9);
    assert!((local_contrast(&split, &mask).unwrap() - 1.0).abs() < 1e-9);
    let a = compute_attributes(&mask, Some(&split));
    assert_eq!(a.get(Attribute::IB), Some(false));
    assert_eq!(compute_attributes(&mask, Some(&same)).get(Attribute::IB), Some(true));
}

#[test]
fn chi_square_matches_direct_loop() {
    let mask = block(24, 24, 5..17, 3..15);
    let img = RgbImage::from_fn(24, 24, |x, y| Rgb([(x * 11 % 256) as u8, (y * 7 % 256) as u8, ((x * y) % 256) as u8]));
    let mut h1 = vec![0.0; 512];
    let mut h2 = vec![0.0; 512];
    let (mut n1, mut n2) = (0.0, 0.0);
    for y in 0..24u32 {
        for x in 0..24u32 {
            let [r, g, b] = img.get_pixel(x, y).0;
            let bin = (r as usize / 32) * 64 + (g as usize / 32) * 8 + b as usize / 32;
            if mask.get(y as usize, x as usize) {
                h1[bin] += 1.0;
                n1 += 1.0;
            } else {
                h2[bin] += 1.0;
                n2 += 1.0;
            }
        }
    }
    let mut expect = 0.0;
    for i in 0..512 {
        let (a, b) = (h1[i] / n1, h2[i] / n2);
        expect += (a - b) * (a - b) / (a + b + 1e-10);
    }
    expect *= 0.5;
    assert!((global_contrast(&img, &mask).unwrap() - expect).abs() < 1e-12);
    let hist = rgb_histogram(&img, &mask).unwrap();
    assert!((hist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(chi_square(&hist, &hist), 0.0);
}

#[test]
fn manifest_from_layout_parses_classes() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("COD10K");
    let m = block(16, 16, 4..10, 4..10);
    write_pair(&root, "COD10K-CAM-3-Flying-53-Bird-3024", &m, |_, _, b| if b { [200, 10, 10] } else { [10, 10, 200] });
    write_pair(&root, "odd_name", &m, |_, _, _| [40, 40, 40]);
    fs::write(root.join("attributes.csv"), "stem,attributes\nodd_name,OC;SC\n").unwrap();
    let manifest = load_manifest(&root).unwrap();
    assert_eq!(manifest.name, "COD10K");
    assert_eq!(manifest.records.len(), 2);
    let bird = &manifest.records[0];
    assert_eq!((bird.super_class.as_str(), bird.sub_class.as_str()), ("Flying", "Bird"));
    assert!(bird.image.is_some());
    assert_eq!(bird.annotated, None);
    let odd = &manifest.records[1];
    assert_eq!((odd.super_class.as_str(), odd.sub_class.as_str()), ("other", "other"));
    assert_eq!(odd.annotated, Some(vec![Attribute::OC, Attribute::SC]));
}

#[test]
fn explicit_manifests_pass_fields_through() {
    let dir = tempfile::tempdir().unwrap();
    let m = block(8, 8, 2..5, 2..5);
    write_pair(dir.path(), "a", &m, |_, _, _| [1, 2, 3]);
    fs::write(
        dir.path().join("list.csv"),
        "image,mask,super_class,sub_class,attributes\nImgs/a.jpg,GT/a.png,Aquatic,Crab,SC\n",
    )
    .unwrap();
    let csv = load_manifest(&dir.path().join("list.csv")).unwrap();
    let r = &csv.records[0];
    assert_eq!((r.super_class.as_str(), r.sub_class.as_str(), r.stem.as_str()), ("Aquatic", "Crab", "a"));
    assert_eq!(r.annotated, Some(vec![Attribute::SC]));
    fs::write(
        dir.path().join("list.json"),
        r#"{"name": "mini", "records": [{"image": "Imgs/a.jpg", "mask": "GT/a.png"}]}"#,
    )
    .unwrap();
    let json = load_manifest(&dir.path().join("list.json")).unwrap();
    assert_eq!(json.name, "mini");
    assert_eq!(json.records[0].super_class, "other");
}

#[test]
fn empty_directory_gives_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let m = load_manifest(dir.path()).unwrap();
    assert!(m.records.is_empty());
    assert_eq!(m.warnings.len(), 1);
    fs::write(dir.path().join("stray.txt"), "x").unwrap();
    assert!(load_manifest(dir.path()).is_err());
}

#[test]
fn mismatched_image_and_mask_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_pair(dir.path(), "a", &block(8, 8, 1..3, 1..3), |_, _, _| [0, 0, 0]);
    block(8, 9, 1..3, 1..3).save_png(&dir.path().join("GT/a.png")).unwrap();
    assert!(load_manifest(dir.path()).is_err());
}

fn fixture() -> (tempfile::TempDir, DatasetManifest) {
    let dir = tempfile::tempdir().unwrap();
    let masks = [
        ("m0", block(20, 20, 0..10, 0..20)),
        ("m1", block(20, 20, 0..20, 0..20)),
        ("m2", block(20, 20, 8..12, 8..12)),
        ("m3", BinaryMask::from_fn(20, 20, |_, _| false)),
        ("m4", block(10, 30, 0..2, 0..2)),
    ];
    for (stem, m) in &masks {
        write_pair(dir.path(), stem, m, |r, c, b| if b { [200, (r * 9) as u8, 20] } else { [20, (c * 9) as u8, 200] });
    }
    let m = load_manifest(dir.path()).unwrap();
    (dir, m)
}

#[test]
fn dataset_statistics() {
    let (_dir, manifest) = fixture();
    let s = dataset_stats(&manifest).unwrap();
    assert_eq!(s.images, 5);
    let ratios = &s.object_size.values;
    assert_eq!(ratios, &vec![0.5, 1.0, 16.0 / 400.0, 0.0, 4.0 / 300.0]);
    assert_eq!(s.object_size.min, Some(0.0));
    assert_eq!(s.object_size.max, Some(1.0));
    let expect = Histogram::uniform(0.0, 1.0, 20, ratios);
    assert_eq!(s.object_size.histogram, expect);
    assert_eq!(s.object_size.histogram.total(), 5);
    assert_eq!(s.object_size.histogram.counts[0], 3);
    assert_eq!(s.object_size.histogram.counts[10], 1);
    assert_eq!(s.object_size.histogram.counts[19], 1);
    assert_eq!(s.empty_masks, 1);
    assert_eq!(s.center_distance.values.len(), 4);
    assert_eq!(s.resolutions.len(), 2);
    let bo = s.attributes.iter().find(|a| a.attribute == Attribute::BO).unwrap();
    assert_eq!((bo.present, bo.known), (2, 5));
    let oc = s.attributes.iter().find(|a| a.attribute == Attribute::OC).unwrap();
    assert_eq!(oc.known, 0);
    assert_eq!(s.cooccurrence[Attribute::BO.index()][Attribute::OV.index()], 2);
    let heat = s.heatmap.as_ref().unwrap();
    assert_eq!(heat.values.len(), 256 * 256);
    assert!(heat.values.iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn statistics_ignore_manifest_order() {
    let (_dir, manifest) = fixture();
    let mut reversed = manifest.clone();
    reversed.records.reverse();
    let a = dataset_stats(&manifest).unwrap();
    let b = dataset_stats(&reversed).unwrap();
    assert_eq!(a, b);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn heatmap_is_pixelwise_average() {
    let dir = tempfile::tempdir().unwrap();
    let a = block(256, 256, 0..128, 0..256);
    let b = block(256, 256, 64..192, 100..200);
    write_pair(dir.path(), "a", &a, |_, _, _| [0, 0, 0]);
    write_pair(dir.path(), "b", &b, |_, _, _| [0, 0, 0]);
    let s = dataset_stats(&load_manifest(dir.path()).unwrap()).unwrap();
    let heat = s.heatmap.unwrap();
    for i in (0..256 * 256).step_by(97) {
        let expect = (a.bits()[i] as u8 + b.bits()[i] as u8) as f64 / 2.0;
        assert_eq!(heat.values[i], expect);
    }
    assert_eq!(center_distance(&block(9, 9, 3..6, 3..6)), Some(0.0));
}
