use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;

fn randn(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn params(rng: &mut ChaCha8Rng, blocks: &[(&str, &[usize])]) -> ParamSet<f64> {
    let mut p = ParamSet::new();
    for (name, dims) in blocks {
        let n = dims.iter().product();
        p.insert(*name, Tensor::new(dims.to_vec(), randn(rng, n)).unwrap(), true)
            .unwrap();
    }
    p
}

/// `Σ w ⊙ y` with a fixed random weight tensor, so every output feeds the loss.
fn weighted_sum(tape: &mut Tape<f64>, y: Var, seed: u64) -> Var {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = tape.dims(y).to_vec();
    let n = tape.value(y).len();
    let w = tape.constant(Tensor::new(dims, randn(&mut rng, n)).unwrap());
    let prod = tape.mul(y, w).unwrap();
    tape.sum_all(prod).unwrap()
}

fn check<B>(p: ParamSet<f64>, names: &[&str], build: B) -> GradCheckReport
where
    B: Fn(&mut Tape<f64>, &ParamSet<f64>) -> Var,
{
    check_with(p, names, build, GradCheckConfig::default())
}

fn check_with<B>(mut p: ParamSet<f64>, names: &[&str], build: B, config: GradCheckConfig) -> GradCheckReport
where
    B: Fn(&mut Tape<f64>, &ParamSet<f64>) -> Var,
{
    finite_diff_check(
        &mut p,
        names,
        |ps| {
            let mut tape = Tape::new(GradFilter::Trainable);
            let loss = build(&mut tape, ps);
            let v = tape.value(loss).item();
            Ok((v, tape.backward(loss)?.into_named()))
        },
        config,
    )
    .unwrap()
}

#[test]
fn matmul_identity_and_hand_sum() {
    let mut tape = Tape::<f64>::default();
    let eye = tape.constant(Tensor::from_f64(&[3, 3], &[1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap());
    let b = tape.constant(Tensor::from_f64(&[3, 2], &[1., 2., 3., 4., 5., 6.]).unwrap());
    let y = tape.matmul(eye, b).unwrap();
    assert_eq!(tape.value(y), tape.value(b));

    let a = tape.constant(Tensor::from_f64(&[2, 2], &[1., 2., 3., 4.]).unwrap());
    let ones = tape.constant(Tensor::from_f64(&[2, 1], &[1., 1.]).unwrap());
    let y = tape.matmul(a, ones).unwrap();
    assert_eq!(tape.value(y).values(), &[3.0, 7.0]);
    assert_eq!(tape.dims(y), &[2, 1]);
}

#[test]
fn matmul_shape_error_names_both_shapes() {
    let mut tape = Tape::<f64>::default();
    let a = tape.constant(Tensor::zeros(&[2, 3]));
    let b = tape.constant(Tensor::zeros(&[4, 5]));
    let msg = tape.matmul(a, b).unwrap_err().to_string();
    assert!(msg.contains("[2, 3]") && msg.contains("[4, 5]"), "{msg}");
}

#[test]
fn matmul_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = params(&mut rng, &[("a", &[4, 5]), ("b", &[5, 3])]);
    let r = check(p, &["a", "b"], |t, ps| {
        let a = t.param(ps, "a").unwrap();
        let b = t.param(ps, "b").unwrap();
        let y = t.matmul(a, b).unwrap();
        weighted_sum(t, y, 7)
    });
    assert!(r.max_rel_err < 1e-6, "{r:?}");
}

#[test]
fn transposed_matmul_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = params(&mut rng, &[("a", &[5, 4]), ("b", &[3, 5])]);
    let r = check(p, &["a", "b"], |t, ps| {
        let a = t.param(ps, "a").unwrap();
        let b = t.param(ps, "b").unwrap();
        let y = t.matmul_t(a, b, true, true).unwrap();
        weighted_sum(t, y, 8)
    });
    assert!(r.max_rel_err < 1e-6, "{r:?}");
}

#[test]
fn layer_norm_examples() {
    let mut tape = Tape::<f64>::default();
    let x = tape.constant(Tensor::from_f64(&[1, 3], &[2.5, 2.5, 2.5]).unwrap());
    let g = tape.constant(Tensor::full(&[3], 1.0));
    let b = tape.constant(Tensor::zeros(&[3]));
    let y = tape.layer_norm(x, g, b, 1e-5).unwrap();
    assert_eq!(tape.value(y).values(), &[0.0, 0.0, 0.0]);

    let x = tape.constant(Tensor::from_f64(&[1, 2], &[1.0, -1.0]).unwrap());
    let g = tape.constant(Tensor::full(&[2], 1.0));
    let b = tape.constant(Tensor::zeros(&[2]));
    let y = tape.layer_norm(x, g, b, 1e-12).unwrap();
    for (got, want) in tape.value(y).values().iter().zip([1.0, -1.0]) {
        assert!((got - want).abs() < 1e-6);
    }
}

#[test]
fn layer_norm_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = params(&mut rng, &[("x", &[3, 8]), ("g", &[8]), ("b", &[8])]);
    let r = check(p, &["x", "g", "b"], |t, ps| {
        let x = t.param(ps, "x").unwrap();
        let g = t.param(ps, "g").unwrap();
        let b = t.param(ps, "b").unwrap();
        let y = t.layer_norm(x, g, b, LAYER_NORM_EPS).unwrap();
        weighted_sum(t, y, 9)
    });
    assert!(r.max_rel_err < 1e-5, "{r:?}");
}

#[test]
fn gelu_values_and_gradient() {
    assert_eq!(kernels::gelu(0.0f64), 0.0);
    assert!((kernels::gelu(10.0f64) - 10.0).abs() < 1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut p = ParamSet::new();
    let xs: Vec<f64> = (0..16).map(|_| rng.gen_range(-3.0..3.0)).collect();
    p.insert("x", Tensor::from_f64(&[16], &xs).unwrap(), true).unwrap();
    let r = check(p, &["x"], |t, ps| {
        let x = t.param(ps, "x").unwrap();
        let y = t.gelu(x).unwrap();
        weighted_sum(t, y, 10)
    });
    assert!(r.max_rel_err < 1e-5, "{r:?}");
}

#[test]
fn gelu_is_monotone_on_tested_range() {
    let mut prev = f64::NEG_INFINITY;
    for i in 0..=400 {
        let x = -0.75 + i as f64 * 0.05;
        let y = kernels::gelu(x);
        assert!(y > prev);
        prev = y;
    }
}

/// Independent oracle: direct log-sum-exp without max shifting.
fn ce_oracle(logits: &[f64], v: usize, targets: &[i64]) -> f64 {
    let mut total = 0.0;
    let mut count = 0;
    for (r, &t) in targets.iter().enumerate() {
        if t == IGNORE_INDEX {
            continue;
        }
        let row = &logits[r * v..(r + 1) * v];
        let lse = row.iter().map(|x| x.exp()).sum::<f64>().ln();
        total += lse - row[t as usize];
        count += 1;
    }
    total / count as f64
}

#[test]
fn cross_entropy_examples() {
    let mut tape = Tape::<f64>::default();
    let l = tape.constant(Tensor::zeros(&[1, 4]));
    let loss = tape.softmax_cross_entropy(l, &[2]).unwrap();
    assert!((tape.value(loss).item() - 4f64.ln()).abs() < 1e-12);

    let mut prev = f64::INFINITY;
    for margin in [1.0, 5.0, 20.0, 60.0] {
        let l = tape.constant(Tensor::from_f64(&[1, 3], &[margin, 0.0, 0.0]).unwrap());
        let ce = tape.softmax_cross_entropy(l, &[0]).unwrap();
        let loss = tape.value(ce).item();
        assert!(loss < prev && loss >= 0.0);
        prev = loss;
    }
    assert!(prev < 1e-20);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let vals: Vec<f64> = (0..15).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let l = tape.constant(Tensor::from_f64(&[3, 5], &vals).unwrap());
    let targets = [4, 0, 2];
    let loss = tape.softmax_cross_entropy(l, &targets).unwrap();
    assert!((tape.value(loss).item() - ce_oracle(&vals, 5, &targets)).abs() < 1e-10);
}

#[test]
fn cross_entropy_ignores_masked_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let p = params(&mut rng, &[("l", &[4, 6])]);
    let run = |p: &ParamSet<f64>, targets: &[i64]| {
        let mut t = Tape::new(GradFilter::Trainable);
        let l = t.param(p, "l").unwrap();
        let loss = t.softmax_cross_entropy(l, targets).unwrap();
        (t.value(loss).item(), t.backward(loss).unwrap().into_named())
    };
    let (loss, grads) = run(&p, &[IGNORE_INDEX, 3, IGNORE_INDEX, 1]);
    let g = grads.get("l").unwrap();
    assert!(g[..6].iter().chain(&g[12..18]).all(|&x| x == 0.0));
    assert!((loss - ce_oracle(p.tensor("l").unwrap().values(), 6, &[IGNORE_INDEX, 3, IGNORE_INDEX, 1])).abs() < 1e-12);

    let (loss, grads) = run(&p, &[IGNORE_INDEX; 4]);
    assert_eq!(loss, 0.0);
    assert!(grads.get("l").map_or(true, |g| g.iter().all(|&x| x == 0.0)));

    let r = check(p, &["l"], |t, ps| {
        let l = t.param(ps, "l").unwrap();
        t.softmax_cross_entropy(l, &[0, IGNORE_INDEX, 5, 2]).unwrap()
    });
    assert!(r.max_rel_err < 1e-6, "{r:?}");
}

#[test]
fn cross_entropy_rejects_out_of_range_targets() {
    let mut tape = Tape::<f64>::default();
    let l = tape.constant(Tensor::zeros(&[2, 3]));
    assert!(matches!(tape.softmax_cross_entropy(l, &[0, 3]), Err(Error::Precondition(_))));
}

#[test]
fn mse_examples() {
    let mut tape = Tape::<f64>::default();
    let p = tape.constant(Tensor::from_f64(&[2], &[1.0, 3.0]).unwrap());
    let l = tape.mse(p, &[1.0, 3.0]).unwrap();
    assert_eq!(tape.value(l).item(), 0.0);
    let l = tape.mse(p, &[0.0, 0.0]).unwrap();
    assert_eq!(tape.value(l).item(), 5.0);
    assert!(matches!(tape.mse(p, &[]), Err(Error::Precondition(_))));

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let target = randn(&mut rng, 7);
    let ps = params(&mut rng, &[("p", &[7])]);
    let r = check(ps, &["p"], move |t, ps| {
        let p = t.param(ps, "p").unwrap();
        t.mse(p, &target).unwrap()
    });
    assert!(r.max_rel_err < 1e-6, "{r:?}");
}

#[test]
fn reduce_mean_examples() {
    let mut tape = Tape::<f64>::default();
    let x = tape.constant(Tensor::from_f64(&[2, 2], &[1., 2., 3., 4.]).unwrap());
    let m = tape.reduce_mean(x, 0).unwrap();
    assert_eq!(tape.value(m).values(), &[2.0, 3.0]);
    assert_eq!(tape.dims(m), &[2]);

    let s = tape.constant(Tensor::from_f64(&[3, 1, 2], &[1., 2., 3., 4., 5., 6.]).unwrap());
    let m = tape.reduce_mean(s, 1).unwrap();
    assert_eq!(tape.value(m).values(), tape.value(s).values());
    assert!(tape.reduce_mean(s, 3).is_err());

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let p = params(&mut rng, &[("x", &[4, 6])]);
    for axis in 0..2 {
        let r = check(p.clone(), &["x"], |t, ps| {
            let x = t.param(ps, "x").unwrap();
            let m = t.reduce_mean(x, axis).unwrap();
            weighted_sum(t, m, 11)
        });
        assert!(r.max_rel_err < 1e-6, "{r:?}");
    }
}

#[test]
fn concat_examples() {
    let mut tape = Tape::<f64>::default();
    let a = tape.constant(Tensor::from_f64(&[2, 3], &[1., 2., 3., 4., 5., 6.]).unwrap());
    let b = tape.constant(Tensor::from_f64(&[1, 3], &[7., 8., 9.]).unwrap());
    let one = tape.concat(&[a], 1).unwrap();
    assert_eq!(tape.value(one), tape.value(a));
    let c = tape.concat(&[a, b], 0).unwrap();
    assert_eq!(tape.dims(c), &[3, 3]);
    assert_eq!(tape.value(c).values(), &[1., 2., 3., 4., 5., 6., 7., 8., 9.]);
    assert!(matches!(tape.concat(&[a, b], 1), Err(Error::Dimension(_))));

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let p = params(&mut rng, &[("a", &[2, 3]), ("b", &[2, 4])]);
    let r = check(p, &["a", "b"], |t, ps| {
        let a = t.param(ps, "a").unwrap();
        let b = t.param(ps, "b").unwrap();
        let c = t.concat(&[a, b, a], 1).unwrap();
        weighted_sum(t, c, 12)
    });
    assert!(r.max_rel_err < 1e-6, "{r:?}");
}

#[test]
fn attention_gradient_and_causality() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let p = params(&mut rng, &[("q", &[6, 8]), ("k", &[6, 8]), ("v", &[6, 8])]);
    for causal in [false, true] {
        let r = check(p.clone(), &["q", "k", "v"], |t, ps| {
            let q = t.param(ps, "q").unwrap();
            let k = t.param(ps, "k").unwrap();
            let v = t.param(ps, "v").unwrap();
            let y = t.attention(q, k, v, 2, causal).unwrap();
            weighted_sum(t, y, 13)
        });
        assert!(r.max_rel_err < 1e-5, "causal={causal} {r:?}");
    }

    let run = |p: &ParamSet<f64>| {
        let mut t = Tape::new(GradFilter::None);
        let q = t.param(p, "q").unwrap();
        let k = t.param(p, "k").unwrap();
        let v = t.param(p, "v").unwrap();
        let y = t.attention(q, k, v, 2, true).unwrap();
        t.value(y).clone()
    };
    let base = run(&p);
    let mut q = p.clone();
    for name in ["k", "v"] {
        let vals = q.get_mut(name).unwrap().tensor.values_mut();
        vals[4 * 8..].iter_mut().for_each(|x| *x += 1.0);
    }
    let pert = run(&q);
    assert_eq!(&base.values()[..4 * 8], &pert.values()[..4 * 8]);
    assert_ne!(&base.values()[4 * 8..], &pert.values()[4 * 8..]);
}

#[test]
fn scale_by_and_gather_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p = params(&mut rng, &[("x", &[5, 3]), ("s", &[1]), ("b", &[3])]);
    let r = check(p, &["x", "s", "b"], |t, ps| {
        let x = t.param(ps, "x").unwrap();
        let s = t.param(ps, "s").unwrap();
        let b = t.param(ps, "b").unwrap();
        let g = t.gather_rows(x, &[4, 0, 0, 2]).unwrap();
        let y = t.scale_by(g, s).unwrap();
        let y = t.add_bias(y, b).unwrap();
        let y = t.scale(y, 0.5).unwrap();
        weighted_sum(t, y, 14)
    });
    assert!(r.max_rel_err < 1e-6, "{r:?}");
}

#[test]
fn finite_diff_check_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut p = params(&mut rng, &[("theta", &[10])]);
    let quad = |ps: &ParamSet<f64>| {
        let mut t = Tape::new(GradFilter::Trainable);
        let th = t.param(ps, "theta").unwrap();
        let sq = t.mul(th, th).unwrap();
        let s = t.sum_all(sq).unwrap();
        let l = t.scale(s, 0.5).unwrap();
        Ok((t.value(l).item(), t.backward(l)?.into_named()))
    };
    let r = finite_diff_check(&mut p, &["theta"], quad, GradCheckConfig::default()).unwrap();
    assert!(r.max_rel_err < 1e-8 && r.pass, "{r:?}");

    // Analytic gradient off by 1e-7 everywhere: fails on relative error
    // alone, passes once absolute slack covers the offset.
    let offset = |ps: &ParamSet<f64>| {
        let (v, mut g) = quad(ps)?;
        g.map.get_mut("theta").unwrap().iter_mut().for_each(|x| *x += 1e-7);
        Ok((v, g))
    };
    let mut tiny = ParamSet::new();
    tiny.insert("theta", Tensor::new(vec![2], vec![1e-6, -2e-6]).unwrap(), true).unwrap();
    let r = finite_diff_check(&mut tiny, &["theta"], offset, GradCheckConfig::default()).unwrap();
    assert!(!r.pass && r.max_rel_err > 1e-2, "{r:?}");
    let loose = GradCheckConfig { atol: 1e-6, ..GradCheckConfig::default() };
    let r2 = finite_diff_check(&mut tiny, &["theta"], offset, loose).unwrap();
    assert!(r2.pass && r2.max_rel_err == r.max_rel_err, "{r2:?}");

    let constant = |_: &ParamSet<f64>| Ok((3.0, NamedGrads::default()));
    let r = finite_diff_check(&mut p, &["theta"], constant, GradCheckConfig::default()).unwrap();
    assert!(r.pass && r.max_rel_err == 0.0);

    let mut calls = 0u32;
    let flaky = |_: &ParamSet<f64>| {
        calls += 1;
        Ok((calls as f64, NamedGrads::default()))
    };
    let err = finite_diff_check(&mut p, &["theta"], flaky, GradCheckConfig::default());
    assert!(matches!(err, Err(Error::NonDeterministic(_))));
}

#[test]
fn adam_examples() {
    assert!(matches!(
        Adam::<f64>::new(AdamConfig { lr: 0.0, ..Default::default() }),
        Err(Error::Config(_))
    ));

    let mut p = ParamSet::<f64>::new();
    p.insert("w", Tensor::scalar(1.0), true).unwrap();
    p.insert("frozen", Tensor::scalar(2.0), false).unwrap();
    let mut g = NamedGrads::default();
    g.map.insert("w".into(), vec![0.0]);
    g.map.insert("frozen".into(), vec![5.0]);
    let mut opt = Adam::new(AdamConfig { lr: 0.1, ..Default::default() }).unwrap();
    opt.step(&mut p, &g);
    assert_eq!(p.tensor("w").unwrap().item(), 1.0);
    assert_eq!(p.tensor("frozen").unwrap().item().to_bits(), 2.0f64.to_bits());

    let mut opt = Adam::new(AdamConfig { lr: 0.1, ..Default::default() }).unwrap();
    g.map.insert("w".into(), vec![1.0]);
    opt.step(&mut p, &g);
    let delta = 1.0 - p.tensor("w").unwrap().item();
    // m̂ = v̂ = 1 on the first step, so the update is lr / (1 + eps).
    assert!((delta - 0.1).abs() < 1e-8, "{delta}");
    assert_eq!(p.tensor("frozen").unwrap().item(), 2.0);
}

#[test]
fn replaying_a_tape_is_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let p = params(&mut rng, &[("x", &[6, 8]), ("w", &[8, 8]), ("g", &[8]), ("b", &[8])]);
    let run = || {
        let mut t = Tape::<f64>::new(GradFilter::Trainable);
        let x = t.param(&p, "x").unwrap();
        let w = t.param(&p, "w").unwrap();
        let g = t.param(&p, "g").unwrap();
        let b = t.param(&p, "b").unwrap();
        let h = t.linear(x, w, Some(b)).unwrap();
        let h = t.layer_norm(h, g, b, 1e-5).unwrap();
        let h = t.gelu(h).unwrap();
        let h = t.attention(h, h, h, 4, true).unwrap();
        let l = weighted_sum(&mut t, h, 3);
        let grads = t.backward(l).unwrap().into_named();
        let mut names: Vec<_> = grads.map.keys().cloned().collect();
        names.sort();
        let flat: Vec<u64> = names
            .iter()
            .flat_map(|n| grads.get(n).unwrap().iter().map(|v| v.to_bits()))
            .collect();
        (t.value(l).item().to_bits(), flat)
    };
    assert_eq!(run(), run());
}

#[test]
fn frozen_leaves_receive_no_gradient() {
    let mut p = ParamSet::<f64>::new();
    p.insert("a", Tensor::from_f64(&[2, 2], &[1., 2., 3., 4.]).unwrap(), false).unwrap();
    p.insert("b", Tensor::from_f64(&[2, 2], &[1., 0., 0., 1.]).unwrap(), true).unwrap();
    let mut t = Tape::new(GradFilter::Trainable);
    let a = t.param(&p, "a").unwrap();
    let b = t.param(&p, "b").unwrap();
    let y = t.matmul(a, b).unwrap();
    let l = t.sum_all(y).unwrap();
    let g = t.backward(l).unwrap();
    assert!(g.param("a").is_none());
    assert!(g.param("b").is_some());
}

/// Central differences at h = 1e-5 on losses summing a few hundred O(1)
/// terms carry absolute rounding error up to about 1e-9, which dominates the
/// relative error of gradients that happen to be close to zero.
const NOISE_FLOOR: f64 = 1e-8;

fn linear_op(t: &mut Tape<f64>, which: u8, x: Var, y: Var) -> Var {
    match which {
        0 => t.matmul_t(x, y, false, true).unwrap(),
        1 => t.add(x, y).unwrap(),
        _ => t.concat(&[x, y], 0).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn linear_ops_match_central_differences(rows in 1usize..=16, cols in 1usize..=16, which in 0u8..3, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = params(&mut rng, &[("x", &[rows, cols]), ("y", &[rows, cols])]);
        let cfg = GradCheckConfig { tol: 1e-6, atol: NOISE_FLOOR, ..GradCheckConfig::default() };
        let r = check_with(p, &["x", "y"], |t, ps| {
            let x = t.param(ps, "x").unwrap();
            let y = t.param(ps, "y").unwrap();
            let z = linear_op(t, which, x, y);
            weighted_sum(t, z, seed)
        }, cfg);
        prop_assert!(r.pass, "{:?}", r);
    }

    #[test]
    fn nonlinear_ops_match_central_differences(rows in 1usize..=16, cols in 2usize..=16, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = params(&mut rng, &[("x", &[rows, cols]), ("g", &[cols]), ("b", &[cols])]);
        let cfg = GradCheckConfig { atol: NOISE_FLOOR, ..GradCheckConfig::default() };
        let r = check_with(p, &["x", "g", "b"], |t, ps| {
            let x = t.param(ps, "x").unwrap();
            let g = t.param(ps, "g").unwrap();
            let b = t.param(ps, "b").unwrap();
            let h = t.layer_norm(x, g, b, 1e-5).unwrap();
            let h = t.gelu(h).unwrap();
            weighted_sum(t, h, seed + 1)
        }, cfg);
        prop_assert!(r.pass, "{:?}", r);
    }

    #[test]
    fn losses_are_non_negative(vals in proptest::collection::vec(-50.0f64..50.0, 12), t0 in 0i64..4, t1 in 0i64..4) {
        let mut tape = Tape::<f64>::default();
        let l = tape.constant(Tensor::from_f64(&[3, 4], &vals).unwrap());
        let ce = tape.softmax_cross_entropy(l, &[t0, IGNORE_INDEX, t1]).unwrap();
        prop_assert!(tape.value(ce).item() >= 0.0);
        let p = tape.constant(Tensor::from_f64(&[12], &vals).unwrap());
        let m = tape.mse(p, &[1.0; 12]).unwrap();
        prop_assert!(tape.value(m).item() >= 0.0);
    }
}
