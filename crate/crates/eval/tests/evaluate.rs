mod common;

use std::fs;
use std::path::Path;

use common::{block, write_pair};
use sinet_eval::metrics::evaluate;
use sinet_eval::{evaluate_dataset, generalization_table, load_manifest, BinaryMask, EvalError, EvalOptions, GrayMap};

fn save_pred(dir: &Path, stem: &str, p: &GrayMap) {
    fs::create_dir_all(dir).unwrap();
    p.save_png(&dir.join(format!("{stem}.png"))).unwrap();
}

#[test]
fn perfect_predictions_score_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let m = block(16, 16, 3..9, 4..12);
    write_pair(&dir.path().join("data"), "COD10K-CAM-1-Aquatic-3-Crab-1", &m, |_, _, _| [0, 0, 0]);
    save_pred(&dir.path().join("pred"), "COD10K-CAM-1-Aquatic-3-Crab-1", &m.to_map());
    let manifest = load_manifest(&dir.path().join("data")).unwrap();
    let r = evaluate_dataset(&dir.path().join("pred"), &manifest, EvalOptions::default()).unwrap();
    let o = r.overall.unwrap();
    assert_eq!(o.count, 1);
    assert_eq!(o.scores.mae, 0.0);
    assert!((o.scores.s_alpha - 1.0).abs() < 1e-12);
    assert!((o.scores.f_beta_w - 1.0).abs() < 1e-12);
    assert_eq!(r.super_classes[0].super_class, "Aquatic");
    assert_eq!(r.sub_classes[0].sub_class.as_deref(), Some("Crab"));
}

#[test]
fn aggregation_is_arithmetic_mean() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let pred = dir.path().join("pred");
    let m = block(10, 10, 0..10, 0..5);
    write_pair(&data, "a", &m, |_, _, _| [0, 0, 0]);
    write_pair(&data, "b", &m, |_, _, _| [0, 0, 0]);
    save_pred(&pred, "a", &m.to_map());
    save_pred(&pred, "b", &block(10, 10, 0..10, 0..10).to_map());
    let manifest = load_manifest(&data).unwrap();
    let r = evaluate_dataset(&pred, &manifest, EvalOptions::default()).unwrap();
    assert_eq!(r.images[1].scores.mae, 0.5);
    assert_eq!(r.overall.unwrap().scores.mae, 0.25);
}

#[test]
fn six_pair_fixture_matches_per_image_sums() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let pred = dir.path().join("pred");
    let stems = [
        "COD10K-CAM-3-Flying-53-Bird-1",
        "COD10K-CAM-3-Flying-53-Bird-2",
        "COD10K-CAM-3-Flying-60-Owl-3",
        "COD10K-CAM-1-Aquatic-3-Crab-4",
        "COD10K-CAM-1-Aquatic-3-Crab-5",
        "plain-6",
    ];
    let mut expected = Vec::new();
    for (k, stem) in stems.iter().enumerate() {
        let m = block(24, 20, k..k + 8, 2 * k..2 * k + 6);
        write_pair(&data, stem, &m, |_, _, _| [9, 9, 9]);
        let levels: Vec<u8> = (0..24 * 20)
            .map(|i| if m.bits()[i] { 255 - (i * 7 % 90) as u8 } else { (i * 13 % 70) as u8 + 10 * k as u8 })
            .collect();
        let p = GrayMap::from_u8(24, 20, &levels).unwrap();
        save_pred(&pred, stem, &p);
        expected.push((stem, evaluate(&p, &m).unwrap()));
    }
    let manifest = load_manifest(&data).unwrap();
    let r = evaluate_dataset(&pred, &manifest, EvalOptions::default()).unwrap();
    let mean = |f: &dyn Fn(&sinet_eval::Scores) -> f64, sel: &dyn Fn(&str) -> bool| {
        let v: Vec<f64> = expected.iter().filter(|(s, _)| sel(s)).map(|(_, x)| f(x)).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let o = r.overall.unwrap();
    assert_eq!(o.count, 6);
    assert!((o.scores.s_alpha - mean(&|s| s.s_alpha, &|_| true)).abs() < 1e-12);
    assert!((o.scores.e_phi - mean(&|s| s.e_phi, &|_| true)).abs() < 1e-12);
    assert!((o.scores.f_beta_w - mean(&|s| s.f_beta_w, &|_| true)).abs() < 1e-12);
    let flying = r.super_classes.iter().find(|c| c.super_class == "Flying").unwrap();
    assert_eq!(flying.report.count, 3);
    assert!((flying.report.scores.mae - mean(&|s| s.mae, &|s| s.contains("Flying"))).abs() < 1e-12);
    let subs: Vec<_> = r.sub_classes.iter().map(|c| c.sub_class.clone().unwrap()).collect();
    assert_eq!(subs, vec!["Crab", "Bird", "Owl", "other"]);
}

#[test]
fn missing_predictions_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let pred = dir.path().join("pred");
    let m = block(8, 8, 2..6, 2..6);
    for s in ["a", "b", "c"] {
        write_pair(&data, s, &m, |_, _, _| [0, 0, 0]);
    }
    save_pred(&pred, "b", &m.to_map());
    let manifest = load_manifest(&data).unwrap();
    match evaluate_dataset(&pred, &manifest, EvalOptions::default()) {
        Err(EvalError::MissingPredictions(v)) => assert_eq!(v, vec!["a", "c"]),
        other => panic!("{other:?}"),
    }
    let r = evaluate_dataset(&pred, &manifest, EvalOptions { skip_missing: true }).unwrap();
    assert_eq!(r.images.len(), 1);
    assert_eq!(r.skipped, vec!["a", "c"]);
}

#[test]
fn predictions_are_resized_and_matched_by_stem() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let pred = dir.path().join("pred");
    write_pair(&data, "Img", &BinaryMask::from_fn(16, 16, |_, c| c < 8), |_, _, _| [0, 0, 0]);
    save_pred(&pred, "img", &GrayMap::from_u8(8, 8, &[255u8, 255, 255, 255, 0, 0, 0, 0].repeat(8)).unwrap());
    let manifest = load_manifest(&data).unwrap();
    let r = evaluate_dataset(&pred, &manifest, EvalOptions::default()).unwrap();
    assert!(r.images[0].resized);
    assert!(r.images[0].scores.mae < 0.1);
}

#[test]
fn cross_dataset_drops() {
    let names: Vec<String> = ["CAMO", "COD10K"].map(String::from).to_vec();
    // rows built so the others-mean matches the reported one
    let rows = generalization_table(&names, &[vec![0.803, 0.702], vec![0.742, 0.700]]).unwrap();
    assert!((rows[0].drop.unwrap() * 100.0 - 12.6).abs() <= 0.1);
    assert!((rows[1].drop.unwrap() * 100.0 + 6.0).abs() <= 0.1);
    assert!(matches!(
        generalization_table(&names, &[vec![0.1, 0.2, 0.3], vec![0.1, 0.2, 0.3]]),
        Err(EvalError::NotSquare { .. })
    ));
}
