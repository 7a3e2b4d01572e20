use std::sync::Arc;

use proptest::prelude::*;
use sinet_core::loss::{structure_loss, weight_map};
use sinet_tensor::{Tape, Tensor};

fn planes() -> impl Strategy<Value = (Vec<bool>, Vec<f64>)> {
    (prop::collection::vec(any::<bool>(), 36), prop::collection::vec(-6.0..6.0f64, 36))
}

proptest! {
    #[test]
    fn structure_loss_is_bounded((g, x) in planes()) {
        let mask = Tensor::new([1, 1, 6, 6], g.iter().map(|&b| b as u8 as f64).collect()).unwrap();
        let w = weight_map(&mask).unwrap();
        prop_assert!(w.data().iter().all(|&v| (1.0..=6.0).contains(&v)));
        let mut tape = Tape::new();
        let logits = tape.constant(Tensor::new([1, 1, 6, 6], x).unwrap());
        let l = structure_loss(&mut tape, logits, &Arc::new(mask), &Arc::new(w)).unwrap();
        let v = tape.value(l).item().unwrap();
        prop_assert!(v.is_finite() && v >= 0.0);
    }
}
