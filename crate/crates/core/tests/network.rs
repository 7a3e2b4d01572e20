mod common;

use common::{eval_with, random, rng, set, zero};
use sinet_core::layers::Builder;
use sinet_core::sinet::{group_guidance, reverse_guidance, GraBlock, Tem};
use sinet_core::{ConvStyle, CoreError, Ctx, DecoderStyle, Mode, ParamStore, Sinet, SinetConfig};
use sinet_tensor::ops::{self, sigmoid_scalar};
use sinet_tensor::{Shape, Tape, Tensor, BN_EPS};

fn pyramid_sizes(size: usize) -> Vec<usize> {
    let (net, store) = Sinet::new(SinetConfig::default()).unwrap();
    let mut tape = Tape::new();
    let mut ctx = Ctx::new(&mut tape, &store, Mode::Eval, false);
    let x = ctx.tape.constant(Tensor::zeros([1, 3, size, size]));
    let p = net.backbone().extract_pyramid(&mut ctx, x).unwrap();
    p.levels.iter().map(|&v| tape.shape(v).height).collect()
}

#[test]
fn pyramid_shape_contract() {
    assert_eq!(pyramid_sizes(352), vec![176, 88, 44, 22, 11]);
    assert_eq!(pyramid_sizes(64), vec![32, 16, 8, 4, 2]);
}

#[test]
fn pyramid_is_deterministic_per_image() {
    let (net, store) = Sinet::new(SinetConfig::default()).unwrap();
    let img = random([1, 3, 64, 64], &mut rng(1), 0.0, 1.0);
    let batch = Tensor::stack_batch(&[img.clone(), img]).unwrap();
    let mut tape = Tape::new();
    let mut ctx = Ctx::new(&mut tape, &store, Mode::Eval, false);
    let x = ctx.tape.constant(batch);
    let p = net.backbone().extract_pyramid(&mut ctx, x).unwrap();
    for &lvl in &p.levels {
        let t = tape.value(lvl);
        assert_eq!(t.batch_item(0), t.batch_item(1));
    }
    // same seed, same parameters
    let (_, again) = Sinet::new(SinetConfig::default()).unwrap();
    for ((_, a), (_, b)) in store.iter().zip(again.iter()) {
        assert_eq!(a.value, b.value);
    }
}

#[test]
fn indivisible_input_rejected() {
    let (net, store) = Sinet::new(SinetConfig::default()).unwrap();
    let err = net.predict(&store, &Tensor::zeros([1, 3, 48, 64])).unwrap_err();
    assert!(matches!(err, CoreError::InputSize { dim: "height", size: 48, divisor: 32 }));
}

#[test]
fn side_output_shapes_64() {
    let (net, store) = Sinet::new(SinetConfig::default()).unwrap();
    let out = net.predict(&store, &random([1, 3, 64, 64], &mut rng(2), 0.0, 1.0)).unwrap();
    let hw = |t: &Tensor| (t.shape().channels, t.shape().height);
    assert_eq!(hw(&out.c6), (1, 8));
    assert_eq!(hw(&out.c3), (1, 8));
    assert_eq!(hw(&out.c4), (1, 4));
    assert_eq!(hw(&out.c5), (1, 2));
    for t in [&out.c6_up, &out.c5_up, &out.c4_up, &out.c3_up] {
        assert_eq!(t.shape(), Shape::new(1, 1, 64, 64));
    }
}

#[test]
fn guided_channel_counts_are_measured() {
    let (net, store) = Sinet::new(SinetConfig::default()).unwrap();
    let mut tape = Tape::new();
    let mut ctx = Ctx::new(&mut tape, &store, Mode::Eval, false);
    let x = ctx.tape.constant(Tensor::zeros([1, 3, 64, 64]));
    let side = net.forward(&mut ctx, x).unwrap();
    assert_eq!(side.guided_channels.len(), 9);
    for &(_, block, channels) in &side.guided_channels {
        assert_eq!(channels, [33, 36, 64][block - 1]);
    }
    // p_1^k is the enhanced feature f'_k
    for (k, &e) in (3..=5).zip(&side.enhanced) {
        assert_eq!(tape.shape(e).channels, 32, "level {k}");
    }
}

fn tem_store(style: ConvStyle, in_channels: usize) -> (Tem, ParamStore) {
    let cfg = SinetConfig {
        tem_conv: style,
        ..SinetConfig::default()
    };
    let mut store = ParamStore::new();
    let mut b = Builder::new(&mut store, 5);
    let tem = Tem::build("tem", in_channels, &cfg, &mut b);
    (tem, store)
}

#[test]
fn tem_shape_and_zero_input() {
    let (tem, store) = tem_store(ConvStyle::Asymmetric, 64);
    let y = eval_with(&store, &random([1, 64, 44, 44], &mut rng(3), -1.0, 1.0), |ctx, x| {
        tem.forward(ctx, x).unwrap()
    });
    assert_eq!(y.shape(), Shape::new(1, 32, 44, 44));
    let z = eval_with(&store, &Tensor::zeros([1, 64, 44, 44]), |ctx, x| tem.forward(ctx, x).unwrap());
    assert!(z.data().iter().all(|&v| v == 0.0));
}

#[test]
fn factorized_pair_equals_rank_one_kernel() {
    let (asym, mut a_store) = tem_store(ConvStyle::Asymmetric, 8);
    let (sym, mut s_store) = tem_store(ConvStyle::Symmetric, 8);
    // shared layers: copy symmetric values into the asymmetric store
    for (_, p) in s_store.iter() {
        if a_store.id(&p.name).is_some() {
            set(&mut a_store, &p.name, p.value.clone());
        }
    }
    let identity_gamma = Tensor::full([1, 32, 1, 1], (1.0 + BN_EPS).sqrt());
    for (branch, d) in [(1, 3), (2, 5), (3, 7)] {
        let pre = format!("tem.branch{branch}");
        // first factor's batchnorm becomes the identity
        set(&mut a_store, &format!("{pre}.col.bn.gamma"), identity_gamma.clone());
        // second factor's batchnorm matches the full kernel's
        for field in ["gamma", "beta", "running_mean", "running_var"] {
            let v = s_store.get(s_store.id(&format!("{pre}.full.bn.{field}")).unwrap()).clone();
            set(&mut a_store, &format!("{pre}.row.bn.{field}"), v);
        }
        let col = a_store.get(a_store.id(&format!("{pre}.col.weight")).unwrap()).clone();
        let row = a_store.get(a_store.id(&format!("{pre}.row.weight")).unwrap()).clone();
        let full = Tensor::from_fn([32, 32, d, d], |o, i, y, x| {
            (0..32).map(|m| row.at(o, m, 0, x) * col.at(m, i, y, 0)).sum()
        })
        .unwrap();
        set(&mut s_store, &format!("{pre}.full.weight"), full);
    }
    let input = random([1, 8, 12, 12], &mut rng(4), -1.0, 1.0);
    let ya = eval_with(&a_store, &input, |ctx, x| asym.forward(ctx, x).unwrap());
    let ys = eval_with(&s_store, &input, |ctx, x| sym.forward(ctx, x).unwrap());
    let diff = ya.max_abs_diff(&ys);
    assert!(diff < 1e-10, "max difference {diff:e}");
}

fn decoded(cfg: SinetConfig, f3: &Tensor, f4: &Tensor, f5: &Tensor, store_edit: impl FnOnce(&mut ParamStore)) -> [Tensor; 4] {
    let (net, mut store) = Sinet::new(cfg).unwrap();
    store_edit(&mut store);
    let mut tape = Tape::new();
    let mut ctx = Ctx::new(&mut tape, &store, Mode::Eval, false);
    let (a, b, c) = (
        ctx.tape.constant(f3.clone()),
        ctx.tape.constant(f4.clone()),
        ctx.tape.constant(f5.clone()),
    );
    let out = net.decoder().forward(&mut ctx, a, b, c).unwrap();
    [out.refined3, out.refined4, out.refined5, out.coarse].map(|v| tape.value(v).clone())
}

#[test]
fn decoder_contract() {
    let mut r = rng(5);
    let f3 = random([1, 32, 44, 44], &mut r, -1.0, 1.0);
    let f4 = random([1, 32, 22, 22], &mut r, -1.0, 1.0);
    let f5 = random([1, 32, 11, 11], &mut r, -1.0, 1.0);
    let [_, _, r5, coarse] = decoded(SinetConfig::default(), &f3, &f4, &f5, |_| {});
    assert_eq!(coarse.shape(), Shape::new(1, 1, 44, 44));
    assert_eq!(r5, f5);
    let zeros5 = Tensor::zeros([1, 32, 11, 11]);
    let [_, r4, _, _] = decoded(SinetConfig::default(), &f3, &f4, &zeros5, |_| {});
    assert!(r4.data().iter().all(|&v| v == 0.0));

    let pd = SinetConfig {
        decoder: DecoderStyle::Pd,
        ..SinetConfig::default()
    };
    let [p3, _, _, pc] = decoded(pd.clone(), &f3, &f4, &f5, |_| {});
    assert_eq!(pc.shape(), coarse.shape());
    // partial decoder: the finest level ignores the neighbour-refined f4
    let [q3, _, _, _] = decoded(pd, &f3, &f4, &f5, |s| zero(s, "decoder.gate1.weight"));
    assert_eq!(p3, q3);
}

#[test]
fn reverse_guidance_values() {
    let mut tape = Tape::new();
    let zeros = tape.constant(Tensor::zeros([1, 1, 44, 44]));
    let r5 = reverse_guidance(&mut tape, zeros, 5).unwrap();
    assert_eq!(tape.shape(r5), Shape::new(1, 1, 11, 11));
    assert!(tape.value(r5).data().iter().all(|&v| v == 0.5));
    let big = tape.constant(Tensor::full([1, 1, 11, 11], 40.0));
    let r4 = reverse_guidance(&mut tape, big, 4).unwrap();
    assert_eq!(tape.shape(r4).height, 22);
    assert!(tape.value(r4).data().iter().all(|&v| v < 1e-15));
    assert!(matches!(reverse_guidance(&mut tape, zeros, 6), Err(CoreError::Config(_))));
    let multi = tape.constant(Tensor::zeros([1, 2, 8, 8]));
    assert!(reverse_guidance(&mut tape, multi, 3).is_err());
}

#[test]
fn group_guidance_layout() {
    let mut tape = Tape::new();
    let p = tape.constant(Tensor::from_fn([1, 4, 2, 2], |_, c, _, _| c as f64).unwrap());
    let r = tape.constant(Tensor::full([1, 1, 2, 2], -1.0));
    let q = group_guidance(&mut tape, p, r, 2).unwrap();
    let v = tape.value(q);
    let order: Vec<f64> = (0..6).map(|c| v.at(0, c, 1, 1)).collect();
    assert_eq!(order, vec![0.0, 1.0, -1.0, 2.0, 3.0, -1.0]);
    assert!(group_guidance(&mut tape, p, r, 3).is_err());
}

#[test]
fn zero_weight_block_is_pure_residual() {
    let cfg = SinetConfig::default();
    for block in 0..3 {
        let mut store = ParamStore::new();
        let mut b = Builder::new(&mut store, 9);
        let gra = GraBlock::build("g", &cfg, block, &mut b);
        for name in ["g.reduce.weight", "g.score.weight", "g.score.bias"] {
            zero(&mut store, name);
        }
        let mut r = rng(6);
        let p = random([1, 32, 8, 8], &mut r, -1.0, 1.0);
        let g = random([1, 1, 8, 8], &mut r, 0.0, 1.0);
        for mode in [Mode::Eval, Mode::Train] {
            let mut tape = Tape::new();
            let mut ctx = Ctx::new(&mut tape, &store, mode, false);
            let (pv, gv) = (ctx.tape.constant(p.clone()), ctx.tape.constant(g.clone()));
            let out = gra.forward(&mut ctx, pv, gv).unwrap();
            assert_eq!(out.guided_channels, cfg.guided_channels(block));
            assert_eq!(tape.value(out.features), &p);
            assert_eq!(tape.value(out.guidance), &g);
        }
    }
}

#[test]
fn zero_refinement_cascades_coarse_map() {
    let (net, mut store) = Sinet::new(SinetConfig::default()).unwrap();
    let names: Vec<String> = store
        .iter()
        .map(|(_, p)| p.name.clone())
        .filter(|n| n.starts_with("gra") && (n.ends_with(".weight") || n.ends_with(".bias")))
        .collect();
    for n in &names {
        zero(&mut store, n);
    }
    let out = net.predict(&store, &random([1, 3, 64, 64], &mut rng(7), 0.0, 1.0)).unwrap();
    // default pattern reverses only the first block, so r_4 = r_1 = 1 - sigmoid(prior)
    let expect = |prior: Tensor| {
        let d: Vec<f64> = prior.data().iter().map(|&v| 1.0 - sigmoid_scalar(v) + v).collect();
        Tensor::new(prior.shape(), d).unwrap()
    };
    let c5 = expect(ops::downsample(&out.c6, 4).unwrap());
    assert!(out.c5.max_abs_diff(&c5) < 1e-12);
    let c4 = expect(ops::upsample_bilinear(&out.c5, 2).unwrap());
    assert!(out.c4.max_abs_diff(&c4) < 1e-12);
    let c3 = expect(ops::upsample_bilinear(&out.c4, 2).unwrap());
    assert!(out.c3.max_abs_diff(&c3) < 1e-12);
}

#[test]
fn ablation_axes_preserve_shapes() {
    let base = SinetConfig::default();
    let mut variants = vec![base.clone()];
    variants.push(SinetConfig { decoder: DecoderStyle::Pd, ..base.clone() });
    variants.push(SinetConfig { tem_conv: ConvStyle::Symmetric, ..base.clone() });
    for r in ["000", "110", "111"] {
        let mut c = base.clone();
        c.set("reverse", r).unwrap();
        variants.push(c);
    }
    for g in ["1;1;1", "8;8;8", "32;32;32", "1;8;32"] {
        let mut c = base.clone();
        c.set("groups", g).unwrap();
        variants.push(c);
    }
    let img = random([1, 3, 64, 64], &mut rng(8), 0.0, 1.0);
    let reference = Sinet::new(base).unwrap();
    let ref_out = reference.0.predict(&reference.1, &img).unwrap();
    for cfg in variants {
        let (net, store) = Sinet::new(cfg.clone()).unwrap();
        let out = net.predict(&store, &img).unwrap();
        for (a, b) in [(&out.c6, &ref_out.c6), (&out.c5, &ref_out.c5), (&out.c4, &ref_out.c4), (&out.c3, &ref_out.c3), (&out.c3_up, &ref_out.c3_up)] {
            assert_eq!(a.shape(), b.shape(), "{cfg:?}");
        }
    }
}

#[test]
fn every_parameter_receives_gradient() {
    let (net, store) = Sinet::new(SinetConfig::default()).unwrap();
    let mut tape = Tape::new();
    let mut ctx = Ctx::new(&mut tape, &store, Mode::Train, true);
    let x = ctx.tape.constant(random([2, 3, 64, 64], &mut rng(9), 0.0, 1.0));
    let side = net.forward(&mut ctx, x).unwrap();
    let vars: Vec<_> = store.trainable().map(|id| (id, ctx.var(id))).collect();
    let loss = tape.sum(side.c3_up);
    let grads = tape.backward(loss).unwrap();
    for (id, v) in vars {
        let g = grads.get(v);
        let name = &store.param(id).name;
        assert!(g.is_some_and(|g| g.data().iter().any(|&x| x != 0.0)), "dead parameter {name}");
    }
}

#[test]
fn side_output_shapes_352() {
    let (net, store) = Sinet::new(SinetConfig::default()).unwrap();
    let out = net.predict(&store, &random([1, 3, 352, 352], &mut rng(10), 0.0, 1.0)).unwrap();
    assert_eq!(out.c6.shape(), Shape::new(1, 1, 44, 44));
    assert_eq!(out.c5.shape(), Shape::new(1, 1, 11, 11));
    assert_eq!(out.c4.shape(), Shape::new(1, 1, 22, 22));
    assert_eq!(out.c3.shape(), Shape::new(1, 1, 44, 44));
    for t in [&out.c6_up, &out.c5_up, &out.c4_up, &out.c3_up] {
        assert_eq!(t.shape(), Shape::new(1, 1, 352, 352));
    }
}
