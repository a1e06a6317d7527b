//! Property tests for the structural invariants: ring arithmetic against
//! the schoolbook oracle, exact transforms, rescaling against big-integer
//! division, and total parsing of the wire format.

use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use hets_core::ring::{next_ntt_prime, Domain, RingParams, RingPoly};
use hets_core::scheme::{Encoder, Plaintext, SchemeParams};
use hets_core::wire;
use hets_core::Error;

fn ring_n16() -> &'static Arc<RingParams> {
    static R: OnceLock<Arc<RingParams>> = OnceLock::new();
    R.get_or_init(|| {
        let p0 = next_ntt_prime(17, 16, 0);
        let p1 = next_ntt_prime(20, 16, 0);
        RingParams::new(16, &[p0, p1]).unwrap()
    })
}

fn ring_n64() -> &'static Arc<RingParams> {
    static R: OnceLock<Arc<RingParams>> = OnceLock::new();
    R.get_or_init(|| {
        let p = next_ntt_prime(19, 64, 0);
        RingParams::new(64, &[p]).unwrap()
    })
}

fn schoolbook_negacyclic(a: &[i64], b: &[i64], p: u64) -> Vec<u64> {
    let n = a.len();
    let mut acc = vec![0i128; n];
    for i in 0..n {
        for j in 0..n {
            let prod = a[i] as i128 * b[j] as i128;
            if i + j < n {
                acc[i + j] += prod;
            } else {
                acc[i + j - n] -= prod;
            }
        }
    }
    acc.iter().map(|&v| v.rem_euclid(p as i128) as u64).collect()
}

fn coeffs(n: usize, bound: i64) -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(-bound..=bound, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// poly_mul equals the schoolbook negacyclic oracle exactly.
    #[test]
    fn mul_matches_schoolbook(a in coeffs(64, 1 << 18), b in coeffs(64, 1 << 18)) {
        let ring = ring_n64();
        let p = ring.primes[0].p;
        let pa = RingPoly::from_signed(ring, 1, &a);
        let pb = RingPoly::from_signed(ring, 1, &b);
        let prod = pa.mul(&pb).unwrap().to_coeff().unwrap();
        let oracle = schoolbook_negacyclic(&a, &b, p);
        prop_assert_eq!(prod.rows()[0].clone(), oracle);
    }

    /// Forward then inverse NTT is the identity, exactly.
    #[test]
    fn ntt_round_trip(a in coeffs(16, 1 << 16)) {
        let ring = ring_n16();
        let poly = RingPoly::from_signed(ring, 2, &a);
        let round = poly.ntt_forward().unwrap().ntt_inverse().unwrap();
        prop_assert_eq!(poly, round);
    }

    /// Ring addition laws: a + 0 = a, a - a = 0, -(-a) = a.
    #[test]
    fn additive_laws(a in coeffs(16, 1 << 20)) {
        let ring = ring_n16();
        let poly = RingPoly::from_signed(ring, 2, &a);
        let zero = RingPoly::zero(ring, 2, Domain::Coefficient);
        prop_assert_eq!(poly.add(&zero).unwrap(), poly.clone());
        prop_assert_eq!(poly.sub(&poly).unwrap(), zero);
        prop_assert_eq!(poly.negate().negate(), poly);
    }

    /// drop_last_prime equals CRT-reconstruct-then-round-divide.
    #[test]
    fn rescale_matches_divide_oracle(a in coeffs(16, i64::MAX / 4)) {
        let ring = ring_n16();
        let poly = RingPoly::from_signed(ring, 2, &a);
        let q_last = ring.primes[1].p as i128;
        let dropped = poly.drop_last_prime().unwrap();
        let ints = poly.to_centered_coeffs(2).unwrap();
        for (j, &v) in ints.iter().enumerate() {
            let q = if v >= 0 { (v + q_last / 2) / q_last } else { -((-v + q_last / 2) / q_last) };
            prop_assert_eq!(dropped.rows()[0][j], ring.primes[0].from_i64(q as i64));
        }
    }

    /// Encoding round-trips within 1e-6 and is additively homomorphic.
    #[test]
    fn encode_decode_round_trip(values in prop::collection::vec(-1.0f64..1.0, 128)) {
        static ENC: OnceLock<(Encoder, Arc<RingParams>)> = OnceLock::new();
        let (enc, ring) = ENC.get_or_init(|| {
            let p0 = next_ntt_prime(55, 256, 0);
            let p1 = next_ntt_prime(55, 256, p0);
            (Encoder::new(256), RingParams::new(256, &[p0, p1]).unwrap())
        });
        let pt = enc.encode(&values, ring, 1, (2f64).powi(40)).unwrap();
        let back = enc.decode(&pt).unwrap();
        for (v, b) in values.iter().zip(&back) {
            prop_assert!((v - b).abs() < 1e-6);
        }
    }

    /// Frame round trip is the identity on arbitrary payloads...
    #[test]
    fn frame_round_trip(payload in prop::collection::vec(any::<u8>(), 0..512)) {
        let frame = wire::encode_frame(wire::FrameKind::InferRequest, &payload);
        let (kind, back) = wire::decode_frame(&frame).unwrap();
        prop_assert_eq!(kind, wire::FrameKind::InferRequest);
        prop_assert_eq!(back, payload);
    }

    /// ...and any single corrupted byte is caught by one of the four
    /// parse errors, never a crash or a silent success.
    #[test]
    fn corrupted_frame_never_parses_silently(
        payload in prop::collection::vec(any::<u8>(), 1..256),
        pos_seed in any::<usize>(),
        flip in 1u8..255,
    ) {
        let frame = wire::encode_frame(wire::FrameKind::Ciphertext, &payload);
        let mut corrupt = frame.clone();
        let pos = pos_seed % corrupt.len();
        corrupt[pos] ^= flip;
        match wire::decode_frame(&corrupt) {
            Ok((kind, body)) => {
                // only the frame-kind byte may reinterpret cleanly; the
                // payload itself is checksummed
                prop_assert_eq!(body, payload);
                prop_assert!(kind != wire::FrameKind::Ciphertext);
            }
            Err(Error::BadMagic(_))
            | Err(Error::BadChecksum { .. })
            | Err(Error::UnsupportedVersion(_))
            | Err(Error::Truncated(_))
            | Err(Error::ParseError(_)) => {}
            Err(other) => prop_assert!(false, "unexpected error {other:?}"),
        }
    }

    /// Bit-packed ciphertext serialization is value-identical.
    #[test]
    fn ciphertext_wire_round_trip(seed in any::<u64>()) {
        static PARAMS: OnceLock<Arc<SchemeParams>> = OnceLock::new();
        let params = PARAMS.get_or_init(|| {
            SchemeParams::from_bit_pattern("custom", 16, &[17, 18, 19], 12, "prop").unwrap()
        });
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        let level = 1 + (seed as usize % params.chain_len().saturating_sub(1));
        let ct = random_ciphertext(params, level, &mut rng);
        let bytes = wire::serialize_ciphertext(&ct);
        let back = wire::deserialize_ciphertext(params, &bytes).unwrap();
        prop_assert_eq!(ct, back);
    }
}

fn random_ciphertext(
    params: &Arc<SchemeParams>,
    level: usize,
    rng: &mut rand_chacha::ChaCha20Rng,
) -> hets_core::Ciphertext {
    use hets_core::ring::SampleKind;
    let parts = (0..2)
        .map(|_| {
            RingPoly::sample(&params.ring, level + 1, SampleKind::Uniform, rng)
                .ntt_forward()
                .unwrap()
        })
        .collect::<Vec<_>>();
    hets_core::Ciphertext::from_parts(parts, (2f64).powi(12), level).unwrap()
}
