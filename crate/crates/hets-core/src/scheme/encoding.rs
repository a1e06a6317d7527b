//! Canonical-embedding encoding: N/2 real slot values per ring element.
//!
//! A ring element m(x) is evaluated at the odd primitive 2N-th roots of
//! unity ζ^(5^j). Restricting to the orbit of 5 (and its conjugates) packs
//! N/2 independent complex slots; we use the real parts. Encoding applies
//! the inverse embedding, scales by Δ and rounds to integer coefficients:
//! slot-wise products of encodings correspond to ring products, slot
//! rotation corresponds to the Galois automorphism x -> x^(5^t).
//!
//! The transform is the standard folded FFT over the 5-orbit: slot j of
//! the forward direction is m(ζ^(5^j)), with the real/imaginary halves of
//! the inverse stored in the low/high coefficient halves. Slot i carries
//! value i; the ordering is fixed so rotation semantics are testable.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ring::{RingParams, RingPoly};

/// Encoded operand: a coefficient-domain ring element with scale and level.
#[derive(Debug, Clone)]
pub struct Plaintext {
    pub poly: RingPoly,
    pub scale: f64,
    pub level: usize,
}

/// Precomputed tables for the slot transform of one ring degree.
#[derive(Debug)]
pub struct Encoder {
    degree: usize,
    slots: usize,
    /// 5^j mod 2N for j < N/2.
    rot_group: Vec<usize>,
    /// e^(2πi k / 2N) for k in 0..=2N.
    ksi: Vec<Complex64>,
}

impl Encoder {
    pub fn new(degree: usize) -> Self {
        assert!(degree.is_power_of_two() && degree >= 8);
        let m = 2 * degree;
        let slots = degree / 2;
        let mut rot_group = Vec::with_capacity(slots);
        let mut five = 1usize;
        for _ in 0..slots {
            rot_group.push(five);
            five = five * 5 % m;
        }
        let ksi = (0..=m)
            .map(|k| {
                let angle = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                Complex64::new(angle.cos(), angle.sin())
            })
            .collect();
        Encoder {
            degree,
            slots,
            rot_group,
            ksi,
        }
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    /// Inverse embedding, scaling by `scale`, rounding to coefficients.
    pub fn encode(
        &self,
        values: &[f64],
        ring: &Arc<RingParams>,
        level: usize,
        scale: f64,
    ) -> Result<Plaintext> {
        if values.len() > self.slots {
            return Err(Error::TooManyValues {
                got: values.len(),
                slots: self.slots,
            });
        }
        assert!(scale > 0.0, "encoding scale must be positive");
        let mut vals = vec![Complex64::new(0.0, 0.0); self.slots];
        for (v, x) in vals.iter_mut().zip(values.iter()) {
            *v = Complex64::new(*x, 0.0);
        }
        self.fft_inv(&mut vals);
        let mut coeffs = vec![0i64; self.degree];
        for (i, v) in vals.iter().enumerate() {
            let re = (v.re * scale).round();
            let im = (v.im * scale).round();
            debug_assert!(
                re.abs() < 9.0e18 && im.abs() < 9.0e18,
                "encoded coefficient overflows i64"
            );
            coeffs[i] = re as i64;
            coeffs[i + self.slots] = im as i64;
        }
        Ok(Plaintext {
            poly: RingPoly::from_signed(ring, level + 1, &coeffs),
            scale,
            level,
        })
    }

    /// Forward embedding of a coefficient-domain element, dividing by the
    /// plaintext scale. Uses as many residue rows as needed to reconstruct
    /// the (small) centered coefficients exactly.
    pub fn decode(&self, pt: &Plaintext) -> Result<Vec<f64>> {
        let coeffs = pt.poly.to_centered_coeffs(3)?;
        let mut vals = vec![Complex64::new(0.0, 0.0); self.slots];
        for i in 0..self.slots {
            vals[i] = Complex64::new(
                coeffs[i] as f64 / pt.scale,
                coeffs[i + self.slots] as f64 / pt.scale,
            );
        }
        self.fft(&mut vals);
        Ok(vals.iter().map(|v| v.re).collect())
    }

    /// Forward slot transform: coefficients to slot values.
    fn fft(&self, vals: &mut [Complex64]) {
        let size = vals.len();
        let m = 2 * self.degree;
        bit_reverse_permute(vals);
        let mut len = 2;
        while len <= size {
            let lenh = len >> 1;
            let lenq = len << 2;
            let gap = m / lenq;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (self.rot_group[j] % lenq) * gap;
                    let u = vals[i + j];
                    let v = vals[i + j + lenh] * self.ksi[idx];
                    vals[i + j] = u + v;
                    vals[i + j + lenh] = u - v;
                }
            }
            len <<= 1;
        }
    }

    /// Inverse slot transform: slot values to coefficients (before scaling).
    fn fft_inv(&self, vals: &mut [Complex64]) {
        let size = vals.len();
        let m = 2 * self.degree;
        let mut len = size;
        while len >= 2 {
            let lenh = len >> 1;
            let lenq = len << 2;
            let gap = m / lenq;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (lenq - self.rot_group[j] % lenq) * gap;
                    let u = vals[i + j] + vals[i + j + lenh];
                    let v = (vals[i + j] - vals[i + j + lenh]) * self.ksi[idx];
                    vals[i + j] = u;
                    vals[i + j + lenh] = v;
                }
            }
            len >>= 1;
        }
        bit_reverse_permute(vals);
        let inv = 1.0 / size as f64;
        for v in vals.iter_mut() {
            *v *= inv;
        }
    }
}

fn bit_reverse_permute(vals: &mut [Complex64]) {
    let n = vals.len();
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if i < j {
            vals.swap(i, j);
        }
    }
}

/// Galois element realizing a left slot rotation by `steps` (taken mod the
/// slot count): x -> x^(5^steps mod 2N).
pub fn galois_element(steps: usize, degree: usize) -> usize {
    let m = 2 * degree;
    let slots = degree / 2;
    let mut g = 1usize;
    let mut base = 5usize;
    let mut e = steps % slots;
    while e > 0 {
        if e & 1 == 1 {
            g = g * base % m;
        }
        base = base * base % m;
        e >>= 1;
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::next_ntt_prime;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn test_ring(degree: usize) -> Arc<RingParams> {
        let p0 = next_ntt_prime(55, degree, 0);
        let p1 = next_ntt_prime(55, degree, p0);
        RingParams::new(degree, &[p0, p1]).unwrap()
    }

    #[test]
    fn zero_round_trips_exactly() {
        let enc = Encoder::new(64);
        let ring = test_ring(64);
        let pt = enc.encode(&[0.0; 32], &ring, 1, (2f64).powi(30)).unwrap();
        assert!(pt.poly.rows.iter().all(|r| r.iter().all(|&v| v == 0)));
        let back = enc.decode(&pt).unwrap();
        assert!(back.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn random_round_trip_error_below_1e6() {
        // 100 random vectors in [-1, 1]^(N/2) at Δ = 2^40
        let degree = 4096;
        let enc = Encoder::new(degree);
        let ring = test_ring(degree);
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let scale = (2f64).powi(40);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let v: Vec<f64> = (0..enc.slots()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let pt = enc.encode(&v, &ring, 1, scale).unwrap();
            let back = enc.decode(&pt).unwrap();
            for (a, b) in v.iter().zip(&back) {
                worst = worst.max((a - b).abs());
            }
        }
        assert!(worst < 1e-6, "max round-trip error {worst}");
    }

    #[test]
    fn encoding_is_additively_homomorphic() {
        let degree = 256;
        let enc = Encoder::new(degree);
        let ring = test_ring(degree);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let scale = (2f64).powi(40);
        let v: Vec<f64> = (0..enc.slots()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..enc.slots()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pv = enc.encode(&v, &ring, 1, scale).unwrap();
        let pw = enc.encode(&w, &ring, 1, scale).unwrap();
        let sum = Plaintext {
            poly: pv.poly.add(&pw.poly).unwrap(),
            scale,
            level: 1,
        };
        let back = enc.decode(&sum).unwrap();
        for ((a, b), s) in v.iter().zip(&w).zip(&back) {
            assert!((a + b - s).abs() < 2e-6);
        }
    }

    #[test]
    fn ring_product_matches_slotwise_product() {
        // the multiplicative homomorphism that everything downstream rests on
        let degree = 256;
        let enc = Encoder::new(degree);
        let ring = test_ring(degree);
        let mut rng = ChaCha20Rng::seed_from_u64(23);
        let scale = (2f64).powi(35);
        let v: Vec<f64> = (0..enc.slots()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let w: Vec<f64> = (0..enc.slots()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let pv = enc.encode(&v, &ring, 1, scale).unwrap();
        let pw = enc.encode(&w, &ring, 1, scale).unwrap();
        let prod = Plaintext {
            poly: pv.poly.mul(&pw.poly).unwrap().to_coeff().unwrap(),
            scale: scale * scale,
            level: 1,
        };
        let back = enc.decode(&prod).unwrap();
        for ((a, b), p) in v.iter().zip(&w).zip(&back) {
            assert!((a * b - p).abs() < 1e-5, "{a} * {b} != {p}");
        }
    }

    #[test]
    fn automorphism_rotates_slots_left() {
        let degree = 64;
        let enc = Encoder::new(degree);
        let ring = test_ring(degree);
        let scale = (2f64).powi(40);
        let v: Vec<f64> = (0..enc.slots()).map(|i| i as f64).collect();
        let pt = enc.encode(&v, &ring, 1, scale).unwrap();
        for steps in [1usize, 2, 5, 31] {
            let g = galois_element(steps, degree);
            let rotated = Plaintext {
                poly: pt.poly.automorphism(g).unwrap(),
                scale,
                level: 1,
            };
            let back = enc.decode(&rotated).unwrap();
            for (j, &b) in back.iter().enumerate() {
                let expect = v[(j + steps) % enc.slots()];
                assert!(
                    (b - expect).abs() < 1e-6,
                    "steps {steps}, slot {j}: got {b}, want {expect}"
                );
            }
        }
    }

    #[test]
    fn rotation_by_slot_count_is_identity() {
        let degree = 64;
        assert_eq!(galois_element(degree / 2, degree), 1);
    }

    #[test]
    fn too_many_values_rejected() {
        let enc = Encoder::new(64);
        let ring = test_ring(64);
        let err = enc.encode(&vec![1.0; 33], &ring, 1, (2f64).powi(30));
        assert!(matches!(err, Err(Error::TooManyValues { .. })));
    }
}
