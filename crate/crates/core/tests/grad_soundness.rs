//! Recorded gradients against central finite differences, per primitive.

use jaitts_core::numerics::{grad_check, standard_normal, Streams, Tape, Tensor, TensorError, Var};
use proptest::prelude::*;
use proptest::test_runner::RngSeed;

const STEP: f64 = 1e-5;
const TOL: f64 = 1e-4;

type R<T> = Result<T, TensorError>;

fn random(shape: &[usize], seed: u64, name: &str) -> Tensor<f64> {
    let n = shape.iter().product();
    let mut rng = Streams::new(seed).stream(name);
    Tensor::new(shape.to_vec(), standard_normal(&mut rng, n)).unwrap()
}

/// `Σ w ⊙ y` with fixed random weights, so no output coordinate has a degenerate adjoint.
fn project(t: &mut Tape<f64>, y: Var, seed: u64) -> R<Var> {
    let w = t.constant(random(t.shape(y), seed, "projection"));
    let p = t.mul(y, w)?;
    Ok(t.sum(p))
}

fn check(x: &Tensor<f64>, seed: u64, f: impl Fn(&mut Tape<f64>, Var) -> R<Var>) -> f64 {
    grad_check(|t, v| { let y = f(t, v)?; project(t, y, seed) }, x, STEP).unwrap()
}

macro_rules! within {
    ($e:expr) => {{
        let err = $e;
        prop_assert!(err <= TOL, "error {}", err);
    }};
}

fn shape() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=8, 1..=3)
}

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 48,
        rng_seed: RngSeed::Fixed(0x6a61_6974),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn unary_elementwise(s in shape(), seed in any::<u64>()) {
        let x = random(&s, seed, "x");
        within!(check(&x, seed, |t, v| Ok(t.gelu(v))));
        within!(check(&x, seed, |t, v| Ok(t.sigmoid(v))));
        within!(check(&x, seed, |t, v| Ok(t.scale(v, -1.7))));
    }

    #[test]
    fn row_normalizers(s in shape(), seed in any::<u64>()) {
        let x = random(&s, seed, "x");
        within!(check(&x, seed, |t, v| Ok(t.softmax(v))));
        if *s.last().unwrap() > 1 {
            within!(check(&x, seed, |t, v| Ok(t.layer_norm(v))));
        }
    }

    #[test]
    fn broadcasting_binary(s in shape(), cut in 0usize..3, seed in any::<u64>()) {
        let cut = cut.min(s.len() - 1);
        let suffix = s[cut..].to_vec();
        let a = random(&s, seed, "a");
        let b = random(&suffix, seed, "b");
        for op in 0..3 {
            let apply = move |t: &mut Tape<f64>, x: Var, y: Var| match op {
                0 => t.add(x, y),
                1 => t.sub(x, y),
                _ => t.mul(x, y),
            };
            let bc = b.clone();
            within!(check(&a, seed, move |t, v| { let c = t.constant(bc.clone()); apply(t, v, c) }));
            let ac = a.clone();
            within!(check(&b, seed, move |t, v| { let c = t.constant(ac.clone()); apply(t, c, v) }));
        }
    }

    #[test]
    fn matmul_layouts(b in 1usize..=4, m in 1usize..=8, k in 1usize..=8, n in 1usize..=8, seed in any::<u64>()) {
        let layouts = [(vec![m, k], vec![k, n]), (vec![b, m, k], vec![k, n]), (vec![b, m, k], vec![b, k, n])];
        for (sa, sb) in layouts {
            let x = random(&sa, seed, "a");
            let y = random(&sb, seed, "b");
            let yc = y.clone();
            within!(check(&x, seed, move |t, v| { let c = t.constant(yc.clone()); t.matmul(v, c) }));
            let xc = x.clone();
            within!(check(&y, seed, move |t, v| { let c = t.constant(xc.clone()); t.matmul(c, v) }));
        }
    }

    #[test]
    fn structural(s in shape(), seed in any::<u64>(), axis_pick in 0usize..3) {
        let axis = axis_pick % s.len();
        let x = random(&s, seed, "x");
        let other = random(&s, seed, "other");
        within!(check(&x, seed, |t, v| { let c = t.constant(other.clone()); t.concat(&[c, v], axis) }));
        within!(check(&x, seed, |t, v| t.concat(&[v, v], axis)));
        let extent = s[axis];
        let (start, len) = (extent / 3, extent - extent / 3);
        within!(check(&x, seed, |t, v| t.slice(v, axis, start, len)));
        let flat = [x.numel()];
        within!(check(&x, seed, |t, v| t.reshape(v, &flat)));
        if s.len() >= 2 {
            within!(check(&x, seed, |t, v| t.transpose(v)));
        }
    }

    #[test]
    fn embedding_rows(vocab in 1usize..=8, d in 1usize..=8, ids in prop::collection::vec(0usize..8, 1..=8), seed in any::<u64>()) {
        let ids: Vec<usize> = ids.into_iter().map(|i| i % vocab).collect();
        let table = random(&[vocab, d], seed, "table");
        within!(check(&table, seed, |t, v| t.embedding(v, &ids)));
    }

    #[test]
    fn scalar_reductions(s in shape(), seed in any::<u64>()) {
        let x = random(&s, seed, "x");
        let target = random(&s, seed, "target");
        let linear = grad_check(|t, v| Ok::<_, TensorError>(t.sum(v)), &x, STEP).unwrap();
        prop_assert!(linear <= 1e-9, "error {}", linear);
        within!(grad_check(|t, v| { let c = t.constant(target.clone()); t.mse(v, c) }, &x, STEP).unwrap());
        within!(grad_check(|t, v| { let c = t.constant(target.clone()); t.mse(c, v) }, &x, STEP).unwrap());
        let labels: Vec<f64> = target.data().iter().map(|&y| if y > 0.0 { 1.0 } else { 0.0 }).collect();
        within!(grad_check(|t, v| t.bce_with_logits(v, &labels), &x, STEP).unwrap());
    }
}

#[test]
fn three_layer_mlp() {
    let x = random(&[5, 6], 11, "input");
    let w1 = random(&[6, 8], 11, "w1");
    let w2 = random(&[8, 8], 11, "w2");
    let w3 = random(&[8, 3], 11, "w3");
    let mlp = |t: &mut Tape<f64>, input: Var, weights: [Var; 3]| -> R<Var> {
        let h = t.matmul(input, weights[0])?;
        let h = t.gelu(h);
        let h = t.matmul(h, weights[1])?;
        let h = t.gelu(h);
        let y = t.matmul(h, weights[2])?;
        Ok(t.sum(y))
    };
    for which in 0..3 {
        let ws = [w1.clone(), w2.clone(), w3.clone()];
        let probe = ws[which].clone();
        let err = grad_check(
            |t, v| {
                let input = t.constant(x.clone());
                let vars: Vec<Var> = (0..3).map(|i| if i == which { v } else { t.constant(ws[i].clone()) }).collect();
                mlp(t, input, [vars[0], vars[1], vars[2]])
            },
            &probe,
            STEP,
        )
        .unwrap();
        assert!(err <= TOL, "layer {which}: {err}");
    }
    let err = grad_check(
        |t, v| {
            let w = [t.constant(w1.clone()), t.constant(w2.clone()), t.constant(w3.clone())];
            mlp(t, v, w)
        },
        &x,
        STEP,
    )
    .unwrap();
    assert!(err <= TOL, "input: {err}");
}

#[test]
fn analytic_examples() {
    let x = Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap();
    let mut t = Tape::new();
    let v = t.leaf(x.clone());
    let sq = t.mul(v, v).unwrap();
    let loss = t.sum(sq);
    let g = t.backward(loss).unwrap();
    assert_eq!(g.get(v).unwrap().data(), &[2.0, -4.0, 1.0]);

    let mut t = Tape::new();
    let v = t.leaf(x);
    let loss = t.mse(v, v).unwrap();
    let g = t.backward(loss).unwrap();
    assert!(g.get(v).is_none_or(|g| g.data().iter().all(|&d| d == 0.0)));
}

#[test]
fn grad_check_rejects_vector_outputs() {
    let x = Tensor::new(vec![2], vec![1.0, 2.0]).unwrap();
    let r = grad_check(|_, v| Ok::<_, TensorError>(v), &x, STEP);
    assert!(matches!(r, Err(TensorError::NotScalar { .. })));
}

#[test]
fn backward_twice_is_an_error() {
    let mut t = Tape::<f64>::new();
    let v = t.leaf(Tensor::scalar(2.0));
    let l = t.sum(v);
    t.backward(l).unwrap();
    assert_eq!(t.backward(l).unwrap_err(), TensorError::BackwardTwice);
}

#[test]
fn backward_requires_a_scalar() {
    let mut t = Tape::<f64>::new();
    let v = t.leaf(Tensor::zeros([2]));
    assert!(matches!(t.backward(v), Err(TensorError::NotScalar { .. })));
}

#[test]
fn shape_errors_name_op_and_shapes() {
    let mut t = Tape::<f64>::new();
    let a = t.leaf(Tensor::zeros([2, 3]));
    let b = t.leaf(Tensor::zeros([4, 5]));
    let msg = t.matmul(a, b).unwrap_err().to_string();
    assert!(msg.contains("matmul") && msg.contains("[2, 3]") && msg.contains("[4, 5]"), "{msg}");
    let msg = t.add(a, b).unwrap_err().to_string();
    assert!(msg.contains("add") && msg.contains("[2, 3]") && msg.contains("[4, 5]"), "{msg}");
}

#[test]
fn fan_out_accumulates_exactly() {
    let x = random(&[4, 3], 5, "x");
    let run = |branches: &[bool; 2]| {
        let mut t = Tape::new();
        let v = t.leaf(x.clone());
        let g_br = t.gelu(v);
        let g_sum = t.sum(g_br);
        let h_br = t.sigmoid(v);
        let h_sum = t.sum(h_br);
        let loss = match branches {
            [true, true] => t.add(g_sum, h_sum).unwrap(),
            [true, false] => g_sum,
            _ => h_sum,
        };
        t.backward(loss).unwrap().take(v).unwrap()
    };
    let both = run(&[true, true]);
    let g = run(&[true, false]);
    let h = run(&[false, true]);
    for ((b, g), h) in both.data().iter().zip(g.data()).zip(h.data()) {
        assert_eq!(*b, g + h);
    }
}

#[test]
fn forward_and_backward_are_bitwise_deterministic() {
    let run = || {
        let mut t = Tape::<f32>::new();
        let a = t.leaf(random(&[3, 7, 5], 9, "a").cast());
        let b = t.leaf(random(&[5, 6], 9, "b").cast());
        let y = t.matmul(a, b).unwrap();
        let y = t.layer_norm(y);
        let y = t.softmax(y);
        let l = t.sum(y);
        let l = t.scale(l, 0.5);
        let value = t.value(l).clone();
        let g = t.backward(l).unwrap();
        (value, g.get(a).cloned(), g.get(b).cloned())
    };
    assert_eq!(run(), run());
}

#[test]
fn primitive_examples() {
    let a = random(&[3, 4], 2, "a");
    let mut t = Tape::<f64>::new();
    let i = t.constant(Tensor::identity(3));
    let av = t.constant(a.clone());
    let p = t.matmul(i, av).unwrap();
    assert_eq!(t.value(p), &a);

    let s = t.softmax(av);
    for r in 0..3 {
        let total: f64 = t.value(s).row(r).iter().sum();
        assert!((total - 1.0).abs() <= 1e-6);
    }

    let c = t.constant(Tensor::full([2, 5], 3.25));
    let n = t.layer_norm(c);
    assert!(t.value(n).data().iter().all(|&x| x == 0.0));
}
