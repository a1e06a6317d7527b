//! Tensor-layer behavior: the op catalog against plain oracles and the
//! mock backend, depth accounting, replication soundness and the rotation
//! discipline of the diagonal-method products.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use hets_core::backend::{Backend, OpEvent};
use hets_core::error::Error;
use hets_core::scheme::SchemeParams;
use hets_core::tensors::{self, Layout, PlainTensor};
use hets_core::Context;

fn ctx() -> &'static Context {
    static CTX: OnceLock<Context> = OnceLock::new();
    CTX.get_or_init(|| Context::create_named("test-4096", &[], Some(0x7e57)).unwrap())
}

/// Deeper 4096 chain for power/polyval ladders beyond depth 2.
fn deep_ctx() -> &'static Context {
    static CTX: OnceLock<Context> = OnceLock::new();
    CTX.get_or_init(|| {
        let params = SchemeParams::from_bit_pattern(
            "custom",
            4096,
            &[40, 40, 30, 30, 30, 30],
            30,
            "test",
        )
        .unwrap();
        Context::create(params, &[], Some(0xdeeb)).unwrap()
    })
}

fn real() -> &'static Backend {
    static B: OnceLock<Backend> = OnceLock::new();
    B.get_or_init(|| Backend::real(ctx()))
}

fn mock() -> &'static Backend {
    static B: OnceLock<Backend> = OnceLock::new();
    B.get_or_init(|| Backend::mock_of(ctx()))
}

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn enc(b: &Backend, v: &[f64], seed: u64) -> tensors::EncryptedVector {
    tensors::encrypt_vector(b, &PlainTensor::vector(v.to_vec()), false, &mut rng(seed)).unwrap()
}

fn dec(b: &Backend, ev: &tensors::EncryptedVector) -> Vec<f64> {
    tensors::decrypt_vector(b, ev).unwrap().data
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn encrypt_decrypt_round_trip() {
    let v = [1.0, 2.0, 3.0];
    let ev = enc(real(), &v, 1);
    assert_eq!(ev.length, 3);
    assert_eq!(ev.replicas(), 1);
    let out = dec(real(), &ev);
    assert!(max_abs_diff(&v, &out) < 1e-4);
}

#[test]
fn replicate_flag_tiles_the_slots() {
    // n = 3, slots = 2048 -> floor(2048/3) = 682 copies
    let v = PlainTensor::vector(vec![1.0, 2.0, 3.0]);
    let ev = tensors::encrypt_vector(real(), &v, true, &mut rng(2)).unwrap();
    assert_eq!(ev.replicas(), 682);
    assert_eq!(ev.valid_span, 2046);
    // replication soundness: copies at offsets k*n
    let slots = real().decrypt(ev.inner()).unwrap();
    for k in 0..682 {
        for i in 0..3 {
            assert!(
                (slots[3 * k + i] - v.data[i]).abs() < 1e-4,
                "copy {k} slot {i}"
            );
        }
    }
}

#[test]
fn too_long_vector_rejected() {
    let v = PlainTensor::vector(vec![0.0; 2049]);
    assert!(matches!(
        tensors::encrypt_vector(real(), &v, false, &mut rng(3)),
        Err(Error::TooLong { .. })
    ));
}

#[test]
fn square_and_negate_values() {
    let ev = enc(real(), &[2.0, 3.0], 4);
    let sq = tensors::square(real(), &ev).unwrap();
    assert_eq!(sq.level(), ev.level() - 1);
    assert!(max_abs_diff(&dec(real(), &sq), &[4.0, 9.0]) < 1e-3);

    let nn = tensors::negate(real(), &tensors::negate(real(), &ev).unwrap()).unwrap();
    assert_eq!(nn.level(), ev.level());
    assert!(max_abs_diff(&dec(real(), &nn), &[2.0, 3.0]) < 2e-4);
}

#[test]
fn power_one_consumes_nothing() {
    let ev = enc(real(), &[1.5, -0.5], 5);
    let p1 = tensors::power(real(), &ev, 1).unwrap();
    assert_eq!(p1.level(), ev.level());
    assert!(max_abs_diff(&dec(real(), &p1), &[1.5, -0.5]) < 1e-4);
}

#[test]
fn power_four_consumes_two_levels() {
    let ev = enc(real(), &[1.2, -1.1, 0.5], 6);
    let p4 = tensors::power(real(), &ev, 4).unwrap();
    assert_eq!(ev.level() - p4.level(), 2);
    let expect: Vec<f64> = [1.2f64, -1.1, 0.5].iter().map(|v| v.powi(4)).collect();
    assert!(max_abs_diff(&dec(real(), &p4), &expect) < 1e-3);
}

#[test]
fn power_five_matches_mock_and_consumes_three() {
    let b = Backend::real(deep_ctx());
    let m = Backend::mock_of(deep_ctx());
    let mut r = rng(7);
    let v: Vec<f64> = (0..64).map(|_| r.random_range(-1.5..1.5)).collect();
    let pt = PlainTensor::vector(v);
    let er = tensors::encrypt_vector(&b, &pt, false, &mut rng(8)).unwrap();
    let em = tensors::encrypt_vector(&m, &pt, false, &mut rng(8)).unwrap();
    let pr = tensors::power(&b, &er, 5).unwrap();
    let pm = tensors::power(&m, &em, 5).unwrap();
    assert_eq!(er.level() - pr.level(), 3);
    // metadata lockstep with the mock
    assert_eq!(pr.level(), pm.level());
    assert_eq!(pr.scale().to_bits(), pm.scale().to_bits());
    assert!(max_abs_diff(&dec(&b, &pr), &dec(&m, &pm)) < 1e-3);
}

#[test]
fn power_zero_and_exhaustion() {
    let ev = enc(real(), &[1.0], 9);
    assert!(matches!(
        tensors::power(real(), &ev, 0),
        Err(Error::ZeroExponent)
    ));
    // test-4096 has 2 usable levels; p = 8 needs 3
    assert!(matches!(
        tensors::power(real(), &ev, 8),
        Err(Error::LevelExhausted(_))
    ));
}

#[test]
fn elementwise_ops_match_plain() {
    let mut r = rng(10);
    let v: Vec<f64> = (0..100).map(|_| r.random_range(-2.0..2.0)).collect();
    let w: Vec<f64> = (0..100).map(|_| r.random_range(-2.0..2.0)).collect();
    let ev = enc(real(), &v, 11);
    let ew = enc(real(), &w, 12);

    let zeros = enc(real(), &vec![0.0; 100], 13);
    let same = tensors::add(real(), &ev, &zeros).unwrap();
    assert!(max_abs_diff(&dec(real(), &same), &v) < 2e-4);

    let sum = tensors::add(real(), &ev, &ew).unwrap();
    let expect: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a + b).collect();
    assert!(max_abs_diff(&dec(real(), &sum), &expect) < 2e-4);

    let prod = tensors::mul(real(), &ev, &ew).unwrap();
    let expect: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a * b).collect();
    assert!(max_abs_diff(&dec(real(), &prod), &expect) < 1e-3);

    let pw = PlainTensor::vector(w.clone());
    let prod_p = tensors::mul_plain(real(), &ev, &pw).unwrap();
    assert!(max_abs_diff(&dec(real(), &prod_p), &expect) < 1e-3);

    let diff_p = tensors::sub_plain(real(), &ev, &pw).unwrap();
    let expect: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a - b).collect();
    assert!(max_abs_diff(&dec(real(), &diff_p), &expect) < 2e-4);
}

#[test]
fn elementwise_mul_plain_example() {
    let ev = enc(real(), &[1.0, 2.0], 14);
    let out = tensors::mul_plain(real(), &ev, &PlainTensor::vector(vec![3.0, 4.0])).unwrap();
    assert!(max_abs_diff(&dec(real(), &out), &[3.0, 8.0]) < 1e-3);
}

#[test]
fn elementwise_length_mismatch() {
    let a = enc(real(), &[1.0, 2.0, 3.0], 15);
    let b = enc(real(), &[1.0, 2.0, 3.0, 4.0], 16);
    assert!(matches!(
        tensors::add(real(), &a, &b),
        Err(Error::ShapeMismatch(_))
    ));
}

#[test]
fn polyval_identity_polynomial() {
    let ev = enc(real(), &[0.25, -1.75, 3.0], 17);
    let out = tensors::polyval(real(), &ev, &[0.0, 1.0]).unwrap();
    assert!(max_abs_diff(&dec(real(), &out), &[0.25, -1.75, 3.0]) < 1e-3);
}

#[test]
fn polyval_bench_polynomial() {
    // 2x^2 + x at x = [1, 2] -> [3, 10]
    let ev = enc(real(), &[1.0, 2.0], 18);
    let out = tensors::polyval(real(), &ev, &[0.0, 1.0, 2.0]).unwrap();
    assert!(max_abs_diff(&dec(real(), &out), &[3.0, 10.0]) < 1e-2);
}

#[test]
fn polyval_degree7_matches_mock() {
    let b = Backend::real(deep_ctx());
    let m = Backend::mock_of(deep_ctx());
    let mut r = rng(19);
    let coeffs: Vec<f64> = (0..8).map(|_| r.random_range(-1.0..1.0)).collect();
    let v: Vec<f64> = (0..128).map(|_| r.random_range(-1.0..1.0)).collect();
    let pt = PlainTensor::vector(v);
    let er = tensors::encrypt_vector(&b, &pt, false, &mut rng(20)).unwrap();
    let em = tensors::encrypt_vector(&m, &pt, false, &mut rng(20)).unwrap();
    let pr = tensors::polyval(&b, &er, &coeffs).unwrap();
    let pm = tensors::polyval(&m, &em, &coeffs).unwrap();
    assert_eq!(pr.level(), pm.level());
    assert!(er.level() - pr.level() <= tensors::depth_of_power(7) + 1);
    assert!(max_abs_diff(&dec(&b, &pr), &dec(&m, &pm)) < 1e-2);
}

#[test]
fn polyval_empty_coeffs() {
    let ev = enc(real(), &[1.0], 21);
    assert!(matches!(
        tensors::polyval(real(), &ev, &[]),
        Err(Error::EmptyCoeffs)
    ));
}

#[test]
fn dot_identity_matrix() {
    let v = PlainTensor::vector(vec![1.0, 2.0, 3.0, 4.0]);
    let ev = tensors::encrypt_vector(real(), &v, true, &mut rng(22)).unwrap();
    let mut eye = vec![0.0; 16];
    for i in 0..4 {
        eye[i * 4 + i] = 1.0;
    }
    let m = PlainTensor::matrix(4, 4, eye).unwrap();
    let out = tensors::dot_plain_matrix(real(), &ev, &m).unwrap();
    assert_eq!(out.length, 4);
    assert_eq!(ev.level() - out.level(), 1);
    assert!(max_abs_diff(&dec(real(), &out), &v.data) < 1e-2);
}

#[test]
fn dot_two_by_two_example() {
    // [1,2] · [[1,2],[3,4]] = [7,10]
    let v = PlainTensor::vector(vec![1.0, 2.0]);
    let ev = tensors::encrypt_vector(real(), &v, true, &mut rng(23)).unwrap();
    let m = PlainTensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let out = tensors::dot_plain_matrix(real(), &ev, &m).unwrap();
    assert!(max_abs_diff(&dec(real(), &out), &[7.0, 10.0]) < 1e-2);
}

fn matmul_oracle(v: &[f64], m: &PlainTensor) -> Vec<f64> {
    let (n, cols) = (m.shape[0], m.shape[1]);
    (0..cols)
        .map(|j| (0..n).map(|i| v[i] * m.at2(i, j)).sum())
        .collect()
}

#[test]
fn dot_non_power_of_two_shapes() {
    // n = 10 (not a power of two), m = 7, many trials
    let mut r = rng(24);
    for trial in 0..50u64 {
        let v: Vec<f64> = (0..10).map(|_| r.random_range(-1.0..1.0)).collect();
        let m_data: Vec<f64> = (0..70).map(|_| r.random_range(-1.0..1.0)).collect();
        let m = PlainTensor::matrix(10, 7, m_data).unwrap();
        let ev = tensors::encrypt_vector(
            real(),
            &PlainTensor::vector(v.clone()),
            true,
            &mut rng(4000 + trial),
        )
        .unwrap();
        let out = tensors::dot_plain_matrix(real(), &ev, &m).unwrap();
        let expect = matmul_oracle(&v, &m);
        assert!(
            max_abs_diff(&dec(real(), &out), &expect) < 1e-2,
            "trial {trial}"
        );
    }
}

#[test]
fn dot_chain_fc_shapes() {
    // 256 -> 64 -> 10, the fully connected chain shapes
    let mut r = rng(25);
    let v: Vec<f64> = (0..256).map(|_| r.random_range(-1.0..1.0)).collect();
    let m1_data: Vec<f64> = (0..256 * 64).map(|_| r.random_range(-0.1..0.1)).collect();
    let m2_data: Vec<f64> = (0..64 * 10).map(|_| r.random_range(-0.1..0.1)).collect();
    let m1 = PlainTensor::matrix(256, 64, m1_data).unwrap();
    let m2 = PlainTensor::matrix(64, 10, m2_data).unwrap();

    let ev = tensors::encrypt_vector(real(), &PlainTensor::vector(v.clone()), true, &mut rng(26))
        .unwrap();
    // 256 * 8 = 2048 slots exactly: fully cyclic, no margin spent
    assert_eq!(ev.valid_span, 2048);
    let mid = tensors::dot_plain_matrix(real(), &ev, &m1).unwrap();
    assert_eq!(mid.valid_span, 2048);
    let out = tensors::dot_plain_matrix(real(), &mid, &m2).unwrap();

    let expect = matmul_oracle(&matmul_oracle(&v, &m1), &m2);
    assert!(max_abs_diff(&dec(real(), &out), &expect) < 1e-2);
}

#[test]
fn dot_issues_only_left_rotations() {
    let v = PlainTensor::vector(vec![1.0; 10]);
    let ev = tensors::encrypt_vector(mock(), &v, true, &mut rng(27)).unwrap();
    let m = PlainTensor::matrix(10, 4, vec![0.5; 40]).unwrap();
    let trace = mock().start_trace();
    tensors::dot_plain_matrix(mock(), &ev, &m).unwrap();
    mock().stop_trace();
    let events = trace.lock().unwrap().clone();
    let rotations: Vec<i64> = events
        .iter()
        .filter_map(|e| match e {
            OpEvent::Rotate { step } => Some(*step),
            _ => None,
        })
        .collect();
    assert_eq!(rotations.len(), 9, "n-1 single-step rotations");
    assert!(rotations.iter().all(|&s| s > 0), "left rotations only");
}

#[test]
fn replication_margin_exhausts_before_corruption() {
    // n = 100 at 2048 slots: 20 replicas, span 2000; each 100-row dot
    // spends 99 slots of margin. Verify decrypted correctness at every
    // successful step and that the failure arrives as an error.
    let mut r = rng(28);
    let v: Vec<f64> = (0..100).map(|_| r.random_range(-1.0..1.0)).collect();
    let mut ev =
        tensors::encrypt_vector(real(), &PlainTensor::vector(v.clone()), true, &mut rng(29))
            .unwrap();
    assert_eq!(ev.replicas(), 20);
    let m_data: Vec<f64> = (0..100 * 100).map(|_| r.random_range(-0.1..0.1)).collect();
    let m = PlainTensor::matrix(100, 100, m_data).unwrap();
    let mut expect = v;
    // depth limits the chain to 2 products on this profile
    for _ in 0..2 {
        match tensors::dot_plain_matrix(real(), &ev, &m) {
            Ok(next) => {
                expect = matmul_oracle(&expect, &m);
                assert!(max_abs_diff(&dec(real(), &next), &expect) < 1e-2);
                assert!(next.valid_span < ev.valid_span);
                ev = next;
            }
            Err(Error::ReplicationExhausted(_)) => return,
            Err(e) => panic!("unexpected error {e:?}"),
        }
    }
}

#[test]
fn replication_exhausted_when_span_too_small() {
    let v: Vec<f64> = (0..1500).map(|i| i as f64 / 1500.0).collect();
    let ev = tensors::encrypt_vector(real(), &PlainTensor::vector(v), true, &mut rng(30)).unwrap();
    assert_eq!(ev.replicas(), 1); // 1500 > 2048/2
    let m = PlainTensor::matrix(1500, 600, vec![0.0; 1500 * 600]).unwrap();
    assert!(matches!(
        tensors::dot_plain_matrix(real(), &ev, &m),
        Err(Error::ReplicationExhausted(_))
    ));
}

#[test]
fn dot_product_encrypted_and_plain() {
    let mut r = rng(31);
    let v: Vec<f64> = (0..48).map(|_| r.random_range(-1.0..1.0)).collect();
    let w: Vec<f64> = (0..48).map(|_| r.random_range(-1.0..1.0)).collect();
    let expect: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();

    let ev = enc(real(), &v, 32);
    let ew = enc(real(), &w, 33);
    let d = tensors::dot_product(real(), &ev, &ew).unwrap();
    assert_eq!(d.length, 1);
    assert!((dec(real(), &d)[0] - expect).abs() < 1e-2);

    let dp = tensors::dot_product_plain(real(), &ev, &PlainTensor::vector(w)).unwrap();
    assert!((dec(real(), &dp)[0] - expect).abs() < 1e-2);
}

#[test]
fn conv_ones_counting_window() {
    // 3x3 ones, 2x2 ones kernel, stride 1 -> every window sums to 4
    let img = PlainTensor::matrix(3, 3, vec![1.0; 9]).unwrap();
    let im = tensors::im2col_encode(&img, 2, 2, 1).unwrap();
    let ev = tensors::encrypt_windowed(real(), &im, &mut rng(34)).unwrap();
    let kernel = PlainTensor::matrix(2, 2, vec![1.0; 4]).unwrap();
    let out = tensors::conv2d_im2col(real(), &ev, &[kernel], None, None).unwrap();
    assert_eq!(out.length, 4);
    assert_eq!(ev.level() - out.level(), 2);
    assert!(max_abs_diff(&dec(real(), &out), &[4.0; 4]) < 1e-2);
}

#[test]
fn conv_random_matches_direct_oracle() {
    let mut r = rng(35);
    let img_data: Vec<f64> = (0..36).map(|_| r.random_range(-1.0..1.0)).collect();
    let img = PlainTensor::matrix(6, 6, img_data).unwrap();
    let kdata: Vec<f64> = (0..9).map(|_| r.random_range(-1.0..1.0)).collect();
    let kernel = PlainTensor::matrix(3, 3, kdata).unwrap();

    let im = tensors::im2col_encode(&img, 3, 3, 1).unwrap();
    let ev = tensors::encrypt_windowed(real(), &im, &mut rng(36)).unwrap();
    let out = tensors::conv2d_im2col(real(), &ev, &[kernel.clone()], None, None).unwrap();
    let expect = tensors::conv2d_direct(&img, &kernel, 1).unwrap();
    assert!(max_abs_diff(&dec(real(), &out), &expect) < 1e-2);
}

#[test]
fn conv_multichannel_cyclic_fold() {
    // 12x12 image, 9x9 kernel, stride 1: 16 windows, 81 taps, chunk 16;
    // 16 chunks padded to 128 -> 2048 slots exactly: fully cyclic fold
    let mut r = rng(37);
    let img_data: Vec<f64> = (0..144).map(|_| r.random_range(-1.0..1.0)).collect();
    let img = PlainTensor::matrix(12, 12, img_data).unwrap();
    let kernels: Vec<PlainTensor> = (0..2)
        .map(|_| {
            let kd: Vec<f64> = (0..81).map(|_| r.random_range(-0.3..0.3)).collect();
            PlainTensor::matrix(9, 9, kd).unwrap()
        })
        .collect();
    let bias = [0.25, -0.5];

    let im = tensors::im2col_encode(&img, 9, 9, 1).unwrap();
    assert_eq!(im.chunk * 128, 2048);
    let ev = tensors::encrypt_windowed(real(), &im, &mut rng(38)).unwrap();
    let out = tensors::conv2d_im2col(real(), &ev, &kernels, Some(&bias), None).unwrap();
    assert_eq!(out.length, 32);

    let mut expect = Vec::new();
    for (k, kernel) in kernels.iter().enumerate() {
        let chan = tensors::conv2d_direct(&img, kernel, 1).unwrap();
        expect.extend(chan.iter().map(|v| v + bias[k]));
    }
    assert!(max_abs_diff(&dec(real(), &out), &expect) < 1e-2);
}

#[test]
fn conv_multichannel_placement_path() {
    // 8x8 image, 5x5 kernel, stride 1: 16 windows, 25 taps, chunk 16,
    // padded to 32 chunks = 512 slots < 2048: chunk-0 fold plus placement
    let mut r = rng(39);
    let img_data: Vec<f64> = (0..64).map(|_| r.random_range(-1.0..1.0)).collect();
    let img = PlainTensor::matrix(8, 8, img_data).unwrap();
    let kernels: Vec<PlainTensor> = (0..3)
        .map(|_| {
            let kd: Vec<f64> = (0..25).map(|_| r.random_range(-0.3..0.3)).collect();
            PlainTensor::matrix(5, 5, kd).unwrap()
        })
        .collect();
    let im = tensors::im2col_encode(&img, 5, 5, 1).unwrap();
    let ev = tensors::encrypt_windowed(real(), &im, &mut rng(40)).unwrap();
    let out = tensors::conv2d_im2col(real(), &ev, &kernels, None, None).unwrap();

    let mut expect = Vec::new();
    for kernel in &kernels {
        expect.extend(tensors::conv2d_direct(&img, kernel, 1).unwrap());
    }
    assert!(max_abs_diff(&dec(real(), &out), &expect) < 1e-2);
}

#[test]
fn conv_on_flat_vector_rejected() {
    // the testable form of "stacking two convolutions is not possible"
    let ev = enc(real(), &[1.0; 16], 41);
    let kernel = PlainTensor::matrix(2, 2, vec![1.0; 4]).unwrap();
    assert!(matches!(
        tensors::conv2d_im2col(real(), &ev, &[kernel], None, None),
        Err(Error::LayoutMismatch(_))
    ));
}

#[test]
fn conv_trace_one_product_then_rounds() {
    let img = PlainTensor::matrix(6, 6, vec![1.0; 36]).unwrap();
    let im = tensors::im2col_encode(&img, 3, 3, 1).unwrap();
    let ev = tensors::encrypt_windowed(mock(), &im, &mut rng(42)).unwrap();
    let kernel = PlainTensor::matrix(3, 3, vec![1.0; 9]).unwrap();
    let trace = mock().start_trace();
    tensors::conv2d_im2col(mock(), &ev, &[kernel], None, None).unwrap();
    mock().stop_trace();
    let events = trace.lock().unwrap().clone();
    // first the single kernel product, then the fold rounds, then rescale
    assert!(matches!(events[0], OpEvent::MulPlain { .. }));
    let first_rescale = events
        .iter()
        .position(|e| matches!(e, OpEvent::Rescale { .. }))
        .unwrap();
    let products_before = events[..first_rescale]
        .iter()
        .filter(|e| matches!(e, OpEvent::MulPlain { .. }))
        .count();
    let rounds_before = events[..first_rescale]
        .iter()
        .filter(|e| matches!(e, OpEvent::Rotate { .. }))
        .count();
    assert_eq!(products_before, 1);
    assert_eq!(rounds_before, 4, "ceil(log2(9)) rotate-add rounds");
}

#[test]
fn replicate_to_fill_produces_copies() {
    let v: Vec<f64> = (0..256).map(|i| (i % 7) as f64).collect();
    let ev = enc(real(), &v, 43);
    let full = tensors::replicate_to_fill(real(), &ev).unwrap();
    assert_eq!(full.valid_span, 2048);
    assert_eq!(full.replicas(), 8);
    let slots = real().decrypt(full.inner()).unwrap();
    for k in 0..8 {
        for i in 0..256 {
            assert!((slots[k * 256 + i] - v[i]).abs() < 1e-3, "copy {k} slot {i}");
        }
    }
}

#[test]
fn windowed_decrypt_matches_flatten() {
    let img = PlainTensor::matrix(3, 3, (1..=9).map(|v| v as f64).collect()).unwrap();
    let im = tensors::im2col_encode(&img, 2, 2, 1).unwrap();
    let ev = tensors::encrypt_windowed(real(), &im, &mut rng(44)).unwrap();
    assert!(matches!(ev.layout, Layout::Windowed { .. }));
    let out = dec(real(), &ev);
    assert!(max_abs_diff(&out, &im.flatten()) < 1e-4);
}
