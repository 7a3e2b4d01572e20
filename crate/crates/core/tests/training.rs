mod common;

use sinet_core::synthetic::{blob_dataset, BlobConfig};
use sinet_core::train::train;
use sinet_core::{CoreError, Sinet, SinetConfig, TrainConfig};

fn small() -> (Vec<sinet_core::Sample>, TrainConfig) {
    let data = blob_dataset(&BlobConfig { count: 4, ..BlobConfig::default() });
    let cfg = TrainConfig {
        batch_size: 2,
        learning_rate: 1e-3,
        epochs: 2,
        max_steps: Some(3),
        seed: 4,
        ..TrainConfig::default()
    };
    (data, cfg)
}

#[test]
fn zero_learning_rate_freezes_weights() {
    let (data, cfg) = small();
    let cfg = TrainConfig { learning_rate: 0.0, ..cfg };
    let (net, mut store) = Sinet::new(SinetConfig::default()).unwrap();
    let before = store.clone();
    let curve = train(&net, &mut store, &data, &cfg, |_| {}).unwrap();
    assert_eq!(curve.steps.len(), 3);
    for ((_, a), (_, b)) in before.iter().zip(store.iter()) {
        if a.trainable {
            assert_eq!(a.value, b.value, "{}", a.name);
        }
    }
    // running statistics still move
    assert!(before.iter().zip(store.iter()).any(|((_, a), (_, b))| !a.trainable && a.value != b.value));
}

#[test]
fn seeded_runs_are_reproducible() {
    let (data, cfg) = small();
    let run = || {
        let (net, mut store) = Sinet::new(SinetConfig::default()).unwrap();
        let mut seen = Vec::new();
        let curve = train(&net, &mut store, &data, &cfg, |s| seen.push(s.step)).unwrap();
        assert_eq!(seen, vec![0, 1, 2]);
        (curve, store)
    };
    let (a, sa) = run();
    let (b, sb) = run();
    assert_eq!(a, b);
    for ((_, x), (_, y)) in sa.iter().zip(sb.iter()) {
        assert_eq!(x.value, y.value);
    }
    assert!(a.losses().iter().all(|l| l.is_finite() && *l > 0.0));
}

#[test]
fn empty_dataset_is_an_error() {
    let (_, cfg) = small();
    let (net, mut store) = Sinet::new(SinetConfig::default()).unwrap();
    assert!(matches!(train(&net, &mut store, &[], &cfg, |_| {}), Err(CoreError::Data(_))));
    let bad = TrainConfig { batch_size: 0, ..cfg };
    let (data, _) = small();
    assert!(matches!(train(&net, &mut store, &data, &bad, |_| {}), Err(CoreError::Config(_))));
}
