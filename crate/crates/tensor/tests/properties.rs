mod common;

use proptest::prelude::*;
use sinet_tensor::ops;
use sinet_tensor::{ConvSpec, Tensor};

fn tensor_strategy(batch: usize, channels: usize, h: usize, w: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-10.0f64..10.0, batch * channels * h * w)
        .prop_map(move |d| Tensor::new([batch, channels, h, w], d).unwrap())
}

proptest! {
    #[test]
    fn concat_inverts_split(
        (x, g) in (1usize..=3, 1usize..=4, 1usize..=4)
            .prop_flat_map(|(n, groups, g)| (tensor_strategy(n, groups * g, 3, 2), Just(g)))
    ) {
        let parts = ops::split_channels(&x, g).unwrap();
        prop_assert_eq!(parts.len(), x.shape().channels / g);
        let refs: Vec<&Tensor> = parts.iter().collect();
        prop_assert_eq!(ops::concat_channels(&refs).unwrap(), x);
    }

    #[test]
    fn centre_tap_conv_is_identity(x in tensor_strategy(2, 3, 5, 4), k in prop::sample::select(vec![1usize, 3, 5])) {
        let spec = ConvSpec::square(3, 3, k);
        let c = k / 2;
        let w = Tensor::from_fn(spec.weight_shape(), |o, i, y, xx| {
            if o == i && y == c && xx == c { 1.0 } else { 0.0 }
        }).unwrap();
        prop_assert_eq!(ops::conv2d(&x, &spec, &w, None).unwrap(), x);
    }

    #[test]
    fn ops_are_pure_and_repeatable(x in tensor_strategy(1, 2, 4, 4), w in tensor_strategy(2, 2, 3, 3)) {
        let spec = ConvSpec::square(2, 2, 3);
        let before = x.clone();
        let a = ops::conv2d(&x, &spec, &w, None).unwrap();
        let b = ops::conv2d(&x, &spec, &w, None).unwrap();
        prop_assert_eq!(&x, &before);
        prop_assert!(a.data().iter().zip(b.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
        let u1 = ops::upsample_bilinear(&x, 2).unwrap();
        let u2 = ops::upsample_bilinear(&x, 2).unwrap();
        prop_assert_eq!(u1, u2);
    }
}
