use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap()
}

#[test]
fn softmax_of_equal_logits_is_uniform() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::row(vec![0.0, 0.0]));
    let y = tape.row_softmax(x).unwrap();
    assert_eq!(tape.value(y).data(), &[0.5, 0.5]);
}

#[test]
fn sigmoid_at_zero_is_half() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::scalar(0.0));
    let y = tape.sigmoid(x).unwrap();
    assert_eq!(tape.value(y).data(), &[0.5]);
}

#[test]
fn bce_of_half_is_ln2() {
    let mut tape = Tape::new();
    let s = tape.constant(Tensor::scalar(0.5));
    let l = tape.bce(s, Arc::from(vec![1.0])).unwrap();
    // -ln(0.5)
    assert!((tape.value(l).data()[0] - std::f64::consts::LN_2).abs() < 1e-6);
    let z = tape.constant(Tensor::scalar(0.0));
    let l2 = tape.bce_with_logits(z, Arc::from(vec![1.0])).unwrap();
    assert!((tape.value(l2).data()[0] - std::f64::consts::LN_2).abs() < 1e-15);
}

#[test]
fn bce_clamps_saturated_probabilities() {
    let mut tape = Tape::new();
    let s = tape.constant(Tensor::row(vec![0.0, 1.0]));
    let l = tape.bce(s, Arc::from(vec![1.0, 0.0])).unwrap();
    // 1 - (1 - 1e-12) is not exactly 1e-12 in binary; allow for that rounding
    let expected = -(1e-12f64).ln();
    assert!((tape.value(l).data()[0] - expected).abs() < 1e-4);
}

#[test]
fn shape_mismatch_names_op() {
    let mut tape = Tape::new();
    let a = tape.constant(Tensor::zeros(&[2, 3]));
    let b = tape.constant(Tensor::zeros(&[2, 3]));
    let err = tape.matmul(a, b).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("matmul") && msg.contains("[2, 3]"), "{msg}");
    assert!(tape.add_row(a, b).is_err());
    let c = tape.constant(Tensor::zeros(&[3, 2]));
    assert!(tape.add(a, c).is_err());
}

#[test]
fn matmul_gradient_hand_case() {
    // loss = sum(W x) with W = I, x = [1, 2]^T  ->  dW[i][j] = x[j]
    let mut store = ParamStore::new();
    let w = store
        .add("w", Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap())
        .unwrap();
    let unused = store.add_zeros("unused", &[3]).unwrap();
    let mut tape = Tape::new();
    let wv = tape.param(&store, w);
    let x = tape.constant(Tensor::column(vec![1.0, 2.0]));
    let y = tape.matmul(wv, x).unwrap();
    let loss = tape.sum(y).unwrap();
    tape.backward(loss, &mut store).unwrap();
    assert_eq!(store.grad(w).data(), &[1.0, 2.0, 1.0, 2.0]);
    assert_eq!(store.grad(unused).data(), &[0.0, 0.0, 0.0]);
}

#[test]
fn sigmoid_gradient_at_zero() {
    let mut store = ParamStore::new();
    let p = store.add("x", Tensor::scalar(0.0)).unwrap();
    let mut tape = Tape::new();
    let x = tape.param(&store, p);
    let y = tape.sigmoid(x).unwrap();
    tape.backward(y, &mut store).unwrap();
    assert_eq!(store.grad(p).data(), &[0.25]);
}

#[test]
fn backward_rejects_non_scalar() {
    let mut store = ParamStore::new();
    let p = store.add("x", Tensor::row(vec![1.0, 2.0])).unwrap();
    let mut tape = Tape::new();
    let x = tape.param(&store, p);
    assert!(matches!(
        tape.backward(x, &mut store),
        Err(DiffError::NotScalar { .. })
    ));
}

#[test]
fn backward_is_additive() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut store = ParamStore::new();
    let w = store.add("w", rand_tensor(&mut rng, &[3, 4])).unwrap();
    let mut tape = Tape::new();
    let wv = tape.param(&store, w);
    let t = tape.tanh(wv).unwrap();
    let sq = tape.mul(t, t).unwrap();
    let loss = tape.sum(sq).unwrap();
    tape.backward(loss, &mut store).unwrap();
    let once = store.grad(w).clone();
    tape.backward(loss, &mut store).unwrap();
    for (a, b) in store.grad(w).data().iter().zip(once.data()) {
        assert_eq!(*a, 2.0 * b);
    }
    store.zero_grad();
    assert!(store.grad(w).data().iter().all(|&g| g == 0.0));
}

#[test]
fn non_finite_forward_is_an_error() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::row(vec![f64::MAX]));
    assert!(matches!(tape.scale(x, 10.0), Err(DiffError::NonFinite { op: "scale" })));
}

#[test]
fn gradcheck_constant_is_exact() {
    let mut store = ParamStore::new();
    store.add("p", Tensor::row(vec![1.0, 2.0])).unwrap();
    let report = grad_check(&mut store, 1e-5, |tape, _| Ok(tape.constant(Tensor::scalar(4.2)))).unwrap();
    assert_eq!(report.max_rel_error, 0.0);
    assert_eq!(report.entries_checked, 2);
}

#[test]
fn gradcheck_quadratic_form() {
    // f(x) = x^T A x with A fixed; central differences are exact up to rounding.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = rand_tensor(&mut rng, &[4, 4]);
    let mut store = ParamStore::new();
    let x = store.add("x", rand_tensor(&mut rng, &[4, 1])).unwrap();
    let report = grad_check(&mut store, 1e-5, |tape, store| {
        let xv = tape.param(store, x);
        let av = tape.constant(a.clone());
        let ax = tape.matmul(av, xv)?;
        let prod = tape.mul(xv, ax)?;
        tape.sum(prod)
    })
    .unwrap();
    assert!(report.max_rel_error < 1e-7, "{report:?}");
}

#[test]
fn sampled_gradcheck_limits_entries_per_parameter() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut store = ParamStore::new();
    let w = store.add("w", rand_tensor(&mut rng, &[5, 6])).unwrap();
    let b = store.add("b", rand_tensor(&mut rng, &[2])).unwrap();
    let mut f = |tape: &mut Tape, store: &ParamStore| {
        let wv = tape.param(store, w);
        let sq = tape.mul(wv, wv)?;
        let s = tape.sum(sq)?;
        let bv = tape.param(store, b);
        let t = tape.sum(bv)?;
        let st = tape.add(s, t)?;
        tape.tanh(st)
    };
    let report = grad_check_sampled(&mut store, 1e-5, 4, 1, &mut f).unwrap();
    assert_eq!(report.entries_checked, 4 + 2);
    assert!(report.max_rel_error < 1e-7);
    let again = grad_check_sampled(&mut store, 1e-5, 4, 1, &mut f).unwrap();
    assert_eq!(report, again);
}

#[test]
fn gradcheck_rejects_bad_eps() {
    let mut store = ParamStore::new();
    store.add("p", Tensor::scalar(1.0)).unwrap();
    assert!(grad_check(&mut store, 0.0, |t, _| Ok(t.constant(Tensor::scalar(0.0)))).is_err());
    assert!(grad_check(&mut store, 1e-2, |t, _| Ok(t.constant(Tensor::scalar(0.0)))).is_err());
}

#[test]
fn gradcheck_reports_non_finite_parameter() {
    let mut store = ParamStore::new();
    store.add("bad", Tensor::scalar(700.0)).unwrap();
    // objective overflows only when the parameter is nudged upward
    let err = grad_check(&mut store, 1e-3, |tape, store| {
        let id = store.find("bad").unwrap();
        let x = tape.param(store, id);
        let v = tape.value(x).data()[0];
        if v > 700.0 {
            let big = tape.constant(Tensor::scalar(f64::MAX));
            tape.scale(big, 2.0)
        } else {
            tape.sum(x)
        }
    })
    .unwrap_err();
    assert!(err.to_string().contains("bad"), "{err}");
}

/// Every primitive, wrapped into a scalar through a random linear functional, checked
/// against central differences on random shapes up to 8 per dimension.
#[test]
fn primitive_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..100 {
        let m = rng.random_range(1..=8);
        let k = rng.random_range(1..=8);
        let n = rng.random_range(1..=8);
        let a0 = rand_tensor(&mut rng, &[m, k]);
        let b0 = rand_tensor(&mut rng, &[k, n]);
        let c0 = rand_tensor(&mut rng, &[m, k]);
        let bias0 = rand_tensor(&mut rng, &[1, k]);
        let s0 = rand_tensor(&mut rng, &[m, 1]);
        let mask = Tensor::new(
            vec![m, k],
            (0..m * k).map(|_| if rng.random_bool(0.8) { 1.25 } else { 0.0 }).collect(),
        )
        .unwrap();
        let segs: Arc<[usize]> = (0..m).map(|_| rng.random_range(0..3)).collect();
        let gather_idx: Arc<[usize]> = (0..rng.random_range(1..=8)).map(|_| rng.random_range(0..m)).collect();
        let labels: Arc<[f64]> = (0..m * k).map(|_| f64::from(rng.random_bool(0.5) as u8)).collect();
        let probe_mk = rand_tensor(&mut rng, &[m, k]);
        let probe_mn = rand_tensor(&mut rng, &[m, n]);

        let mut store = ParamStore::new();
        let a = store.add("a", a0).unwrap();
        let b = store.add("b", b0).unwrap();
        let c = store.add("c", c0).unwrap();
        let bias = store.add("bias", bias0).unwrap();
        let s = store.add("s", s0).unwrap();

        type Build<'a> = dyn Fn(&mut Tape, [Var; 5]) -> Result<Var, DiffError> + 'a;
        let cases: Vec<(&str, Box<Build<'_>>, bool)> = vec![
            ("matmul", Box::new(|t, [a, b, ..]| t.matmul(a, b)), false),
            ("add", Box::new(|t, [a, _, c, ..]| t.add(a, c)), true),
            ("sub", Box::new(|t, [a, _, c, ..]| t.sub(a, c)), true),
            ("mul", Box::new(|t, [a, _, c, ..]| t.mul(a, c)), true),
            ("add_row", Box::new(|t, [a, _, _, bias, _]| t.add_row(a, bias)), true),
            ("concat_cols", Box::new(|t, [a, _, c, ..]| {
                // concat then split back and recombine asymmetrically
                let w = t.shape(a)[1];
                let x = t.concat_cols(&[a, c])?;
                let left = t.slice_cols(x, 0, w)?;
                let right = t.slice_cols(x, w, w)?;
                let r2 = t.mul(right, right)?;
                t.add(left, r2)
            }), true),
            ("concat_rows", Box::new(|t, [a, _, c, ..]| {
                let x = t.concat_rows(&[a, c])?;
                let sq = t.mul(x, x)?;
                let sum = t.sum(sq)?;
                let row = t.sum(a)?;
                t.mul(sum, row)
            }), false),
            ("row_softmax", Box::new(|t, [a, ..]| t.row_softmax(a)), true),
            ("segment_softmax", Box::new(|t, [_, _, _, _, s]| {
                let segs: Arc<[usize]> = segs.clone();
                t.segment_softmax(s, segs, 3)
            }), false),
            ("sigmoid", Box::new(|t, [a, ..]| t.sigmoid(a)), true),
            ("tanh", Box::new(|t, [a, ..]| t.tanh(a)), true),
            ("leaky_relu", Box::new(|t, [a, ..]| t.leaky_relu(a, 0.2)), true),
            ("scale", Box::new(|t, [a, ..]| t.scale(a, -1.7)), true),
            ("one_minus", Box::new(|t, [a, ..]| t.one_minus(a)), true),
            ("dropout", Box::new(|t, [a, ..]| t.dropout(a, mask.clone())), true),
            ("bce", Box::new(|t, [a, ..]| {
                let p = t.sigmoid(a)?;
                t.bce(p, labels.clone())
            }), false),
            ("bce_with_logits", Box::new(|t, [a, ..]| t.bce_with_logits(a, labels.clone())), false),
            ("gather_rows", Box::new(|t, [a, ..]| {
                let g = t.gather_rows(a, gather_idx.clone())?;
                let sq = t.mul(g, g)?;
                t.sum(sq)
            }), false),
            ("scatter_add_rows", Box::new(|t, [a, ..]| {
                let idx: Arc<[usize]> = (0..t.shape(a)[0]).map(|i| i % 2).collect();
                let sc = t.scatter_add_rows(a, idx, 2)?;
                let sq = t.mul(sc, sc)?;
                t.sum(sq)
            }), false),
            ("scale_rows", Box::new(|t, [a, _, _, _, s]| t.scale_rows(a, s)), true),
            ("row_dot", Box::new(|t, [a, _, c, ..]| {
                let d = t.row_dot(a, c)?;
                let sq = t.mul(d, d)?;
                t.sum(sq)
            }), false),
            ("mean", Box::new(|t, [a, ..]| {
                let sq = t.mul(a, a)?;
                t.mean(sq)
            }), false),
        ];

        for (name, build, mk_probe) in &cases {
            let report = grad_check(&mut store, 1e-5, |tape, store| {
                let vars = [a, b, c, bias, s].map(|id| tape.param(store, id));
                let out = build(tape, vars)?;
                let shape = tape.shape(out).to_vec();
                if shape == [1] {
                    return Ok(out);
                }
                let probe = if *mk_probe {
                    probe_mk.clone()
                } else if shape == [m, n] {
                    probe_mn.clone()
                } else {
                    Tensor::full(&shape, 0.37)
                };
                let p = tape.constant(probe);
                let weighted = tape.mul(out, p)?;
                tape.sum(weighted)
            })
            .unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(
                report.max_rel_error < 1e-4,
                "trial {trial} {name} shapes ({m},{k},{n}): {report:?}"
            );
        }
    }
}

proptest! {
    #[test]
    fn softmax_rows_are_distributions(rows in 1usize..6, cols in 1usize..9, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(vec![rows, cols], (0..rows * cols).map(|_| rng.random_range(-50.0..50.0)).collect()).unwrap());
        let y = tape.row_softmax(x).unwrap();
        for r in 0..rows {
            let row = tape.value(y).row_slice(r);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn forward_is_bit_identical(seed in any::<u64>()) {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = rand_tensor(&mut rng, &[5, 7]);
            let b = rand_tensor(&mut rng, &[7, 3]);
            let mut tape = Tape::new();
            let (a, b) = (tape.constant(a), tape.constant(b));
            let c = tape.matmul(a, b).unwrap();
            let t = tape.tanh(c).unwrap();
            let s = tape.row_softmax(t).unwrap();
            tape.value(s).data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        };
        prop_assert_eq!(run(), run());
    }
}
