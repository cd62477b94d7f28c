#![allow(clippy::needless_range_loop)]

//! Independent-oracle checks: naive-loop equivalence for the kernels,
//! finite-difference gradients, and instrumented FLOP counts.

mod common;

use common::{count_conv_flops, count_dense_flops, naive_conv2d, naive_maxpool, rel_err};
use epoch_oracle::featurespace::{flops_conv, flops_dense, output_dim};
use epoch_oracle::kernels::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, maxpool_forward,
    ActivationKind, ConvParams, DenseParams, Matrix, Tensor4,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FD_STEP: f64 = 1e-5;
const FD_TOL: f64 = 1e-4;

fn fill(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

fn random_activation(rng: &mut ChaCha8Rng) -> ActivationKind {
    ActivationKind::ALL[rng.gen_range(0..ActivationKind::ALL.len())]
}

#[test]
fn conv_forward_matches_naive_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for case in 0..50 {
        let b = rng.gen_range(1..=2);
        let h = rng.gen_range(2..=8);
        let c_in = rng.gen_range(1..=4);
        let c_out = rng.gen_range(1..=4);
        let k = rng.gen_range(1..=h.min(3));
        let s = rng.gen_range(1..=2);
        let p = rng.gen_range(0..=1);
        let input = Tensor4::new([b, h, h, c_in], fill(&mut rng, b * h * h * c_in)).unwrap();
        let kernel =
            Tensor4::new([k, k, c_in, c_out], fill(&mut rng, k * k * c_in * c_out)).unwrap();
        let bias = if rng.gen_bool(0.5) { Some(fill(&mut rng, c_out)) } else { None };

        let params = ConvParams::new(kernel.clone(), bias.clone(), s, p).unwrap();
        let got = conv2d_forward(&input, &params, ActivationKind::None).unwrap();
        let want = naive_conv2d(&input, &kernel, bias.as_deref(), s, p);
        assert_eq!(got.dims(), want.dims(), "case {case}");
        for (g, w) in got.data().iter().zip(want.data()) {
            assert!((g - w).abs() <= 1e-9, "case {case}: {g} vs {w}");
        }
    }
}

#[test]
fn random_conv_instances_match_naive_on_4x4x2_to_3() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let input = Tensor4::new([1, 4, 4, 2], fill(&mut rng, 32)).unwrap();
        let kernel = Tensor4::new([2, 2, 2, 3], fill(&mut rng, 24)).unwrap();
        let params = ConvParams::new(kernel.clone(), None, 1, 0).unwrap();
        let got = conv2d_forward(&input, &params, ActivationKind::None).unwrap();
        let want = naive_conv2d(&input, &kernel, None, 1, 0);
        for (g, w) in got.data().iter().zip(want.data()) {
            assert!((g - w).abs() <= 1e-9);
        }
    }
}

#[test]
fn maxpool_matches_naive_window_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for case in 0..50 {
        let b = rng.gen_range(1..=2);
        let h = rng.gen_range(2..=8);
        let c = rng.gen_range(1..=4);
        let k = rng.gen_range(1..=h.min(3));
        let s = rng.gen_range(1..=2);
        let p = rng.gen_range(0..k); // padding < kernel
        let input = Tensor4::new([b, h, h, c], fill(&mut rng, b * h * h * c)).unwrap();
        let got: Tensor4<f64> = maxpool_forward(&input, k, s, p).unwrap();
        let want = naive_maxpool(&input, k, s, p);
        assert_eq!(got.dims(), want.dims(), "case {case}");
        for (g, w) in got.data().iter().zip(want.data()) {
            assert_eq!(g.to_bits(), w.to_bits(), "case {case}");
        }
    }
}

#[test]
fn maxpool_on_random_6x6x3_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..10 {
        let input = Tensor4::new([1, 6, 6, 3], fill(&mut rng, 108)).unwrap();
        let got: Tensor4<f64> = maxpool_forward(&input, 2, 2, 0).unwrap();
        let want = naive_maxpool(&input, 2, 2, 0);
        assert_eq!(got.data(), want.data());
    }
}

#[test]
fn dense_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for case in 0..10 {
        let b = rng.gen_range(1..=3);
        let i = rng.gen_range(1..=5);
        let o = rng.gen_range(1..=5);
        let act = random_activation(&mut rng);
        let input = Matrix::new(b, i, fill(&mut rng, b * i)).unwrap();
        let weights = Matrix::new(i, o, fill(&mut rng, i * o)).unwrap();
        let bias = fill(&mut rng, o);
        let upstream = Matrix::new(b, o, fill(&mut rng, b * o)).unwrap();

        let params = DenseParams::new(weights.clone(), Some(bias.clone())).unwrap();
        let grads = dense_backward(&input, &params, act, &upstream).unwrap();

        let loss = |params: &DenseParams<f64>, input: &Matrix<f64>| -> f64 {
            let out = dense_forward(input, params, act).unwrap();
            out.data().iter().zip(upstream.data()).map(|(a, g)| a * g).sum()
        };

        // Weights.
        for r in 0..i {
            for cidx in 0..o {
                let mut plus = params.clone();
                *plus.weights.at_mut(r, cidx) += FD_STEP;
                let mut minus = params.clone();
                *minus.weights.at_mut(r, cidx) -= FD_STEP;
                let fd = (loss(&plus, &input) - loss(&minus, &input)) / (2.0 * FD_STEP);
                let an = grads.weights.at(r, cidx);
                assert!(
                    rel_err(an, fd) < FD_TOL,
                    "case {case} ({act}): dW[{r},{cidx}] analytic {an} vs fd {fd}"
                );
            }
        }
        // Bias.
        let gbias = grads.bias.as_ref().unwrap();
        for idx in 0..o {
            let mut plus = params.clone();
            plus.bias.as_mut().unwrap()[idx] += FD_STEP;
            let mut minus = params.clone();
            minus.bias.as_mut().unwrap()[idx] -= FD_STEP;
            let fd = (loss(&plus, &input) - loss(&minus, &input)) / (2.0 * FD_STEP);
            assert!(
                rel_err(gbias[idx], fd) < FD_TOL,
                "case {case} ({act}): db[{idx}] analytic {} vs fd {fd}",
                gbias[idx]
            );
        }
        // Input.
        for r in 0..b {
            for cidx in 0..i {
                let mut plus = input.clone();
                *plus.at_mut(r, cidx) += FD_STEP;
                let mut minus = input.clone();
                *minus.at_mut(r, cidx) -= FD_STEP;
                let fd = (loss(&params, &plus) - loss(&params, &minus)) / (2.0 * FD_STEP);
                let an = grads.input.at(r, cidx);
                assert!(
                    rel_err(an, fd) < FD_TOL,
                    "case {case} ({act}): dx[{r},{cidx}] analytic {an} vs fd {fd}"
                );
            }
        }
    }
}

#[test]
fn conv_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for case in 0..5 {
        // 5x5 image, 2 -> 2 channels, 3x3 kernel.
        let (h, c_in, c_out, k) = (5usize, 2usize, 2usize, 3usize);
        let s = rng.gen_range(1..=2);
        let p = rng.gen_range(0..=1);
        let act = random_activation(&mut rng);
        let input = Tensor4::new([1, h, h, c_in], fill(&mut rng, h * h * c_in)).unwrap();
        let kernel =
            Tensor4::new([k, k, c_in, c_out], fill(&mut rng, k * k * c_in * c_out)).unwrap();
        let bias = fill(&mut rng, c_out);
        let params = ConvParams::new(kernel, Some(bias), s, p).unwrap();
        let h_out = output_dim(h, k, s, p).unwrap();
        let upstream =
            Tensor4::new([1, h_out, h_out, c_out], fill(&mut rng, h_out * h_out * c_out))
                .unwrap();

        let grads = conv2d_backward(&input, &params, act, &upstream).unwrap();
        let loss = |params: &ConvParams<f64>, input: &Tensor4<f64>| -> f64 {
            let out = conv2d_forward(input, params, act).unwrap();
            out.data().iter().zip(upstream.data()).map(|(a, g)| a * g).sum()
        };

        for idx in 0..params.kernel.len() {
            let mut plus = params.clone();
            plus.kernel.data_mut()[idx] += FD_STEP;
            let mut minus = params.clone();
            minus.kernel.data_mut()[idx] -= FD_STEP;
            let fd = (loss(&plus, &input) - loss(&minus, &input)) / (2.0 * FD_STEP);
            let an = grads.kernel.data()[idx];
            assert!(
                rel_err(an, fd) < FD_TOL,
                "case {case} ({act}): dK[{idx}] analytic {an} vs fd {fd}"
            );
        }
        let gbias = grads.bias.as_ref().unwrap();
        for idx in 0..c_out {
            let mut plus = params.clone();
            plus.bias.as_mut().unwrap()[idx] += FD_STEP;
            let mut minus = params.clone();
            minus.bias.as_mut().unwrap()[idx] -= FD_STEP;
            let fd = (loss(&plus, &input) - loss(&minus, &input)) / (2.0 * FD_STEP);
            assert!(
                rel_err(gbias[idx], fd) < FD_TOL,
                "case {case} ({act}): db[{idx}] analytic {} vs fd {fd}",
                gbias[idx]
            );
        }
        for idx in 0..input.len() {
            let mut plus = input.clone();
            plus.data_mut()[idx] += FD_STEP;
            let mut minus = input.clone();
            minus.data_mut()[idx] -= FD_STEP;
            let fd = (loss(&params, &plus) - loss(&params, &minus)) / (2.0 * FD_STEP);
            let an = grads.input.data()[idx];
            assert!(
                rel_err(an, fd) < FD_TOL,
                "case {case} ({act}): dx[{idx}] analytic {an} vs fd {fd}"
            );
        }
    }
}

#[test]
fn flop_formulas_equal_instrumented_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for _ in 0..20 {
        let b = rng.gen_range(1..=4);
        let i = rng.gen_range(1..=10);
        let o = rng.gen_range(1..=10);
        let bias = rng.gen_bool(0.5);
        assert_eq!(flops_dense(b, i, o, bias).unwrap(), count_dense_flops(b, i, o, bias));
    }
    for _ in 0..20 {
        let b = rng.gen_range(1..=3);
        let h = rng.gen_range(1..=7);
        let k = rng.gen_range(1..=h);
        let c_in = rng.gen_range(1..=4);
        let c_out = rng.gen_range(1..=4);
        let s = rng.gen_range(1..=2);
        let p = rng.gen_range(0..=2);
        let bias = rng.gen_bool(0.5);
        assert_eq!(
            flops_conv(b, h, k, c_in, c_out, s, p, bias).unwrap(),
            count_conv_flops(b, h, k, c_in, c_out, s, p, bias),
        );
    }
}

#[test]
fn degenerate_conv_forward_equals_dense_forward() {
    // K=1, S=1, P=0 on a 1x1 image with C_in=C_out=1 is the scalar dense op.
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for _ in 0..10 {
        let x: f64 = rng.gen_range(-1.0..=1.0);
        let w: f64 = rng.gen_range(-1.0..=1.0);
        let input_t = Tensor4::new([1, 1, 1, 1], vec![x]).unwrap();
        let kernel = Tensor4::new([1, 1, 1, 1], vec![w]).unwrap();
        let conv = conv2d_forward(
            &input_t,
            &ConvParams::new(kernel, None, 1, 0).unwrap(),
            ActivationKind::Tanh,
        )
        .unwrap();

        let input_m = Matrix::new(1, 1, vec![x]).unwrap();
        let dense = dense_forward(
            &input_m,
            &DenseParams::new(Matrix::new(1, 1, vec![w]).unwrap(), None).unwrap(),
            ActivationKind::Tanh,
        )
        .unwrap();
        assert_eq!(conv.data()[0].to_bits(), dense.data()[0].to_bits());
    }
}
