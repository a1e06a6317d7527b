//! Ring elements of R_q = Z_q[x]/(x^N + 1) in RNS (residue number system)
//! representation: one residue row per active prime of the modulus chain.
//!
//! Every operation is pure; inputs are never mutated. Arithmetic between
//! two elements requires identical degree, identical active prime chains
//! and identical domains.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use super::prime::{is_prime_u64, PrimeContext};
use crate::error::{Error, Result};

/// Target standard deviation of the error distribution. Sampled as a
/// centered binomial with 20 trials per side (σ = √10 ≈ 3.162, within 1.2%
/// of the target), clamped to ±6σ.
pub const ERROR_SIGMA: f64 = 3.2;

const CBD_BITS: u32 = 20;
const ERROR_CLAMP: i64 = 19; // floor(6 * ERROR_SIGMA)

/// Representation domain of a ring element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Plain coefficient vector.
    Coefficient,
    /// Pointwise evaluations at the odd powers of ψ (NTT form).
    Evaluation,
}

/// Distribution selector for `RingPoly::sample`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    /// Coefficients uniform in {-1, 0, 1}.
    Ternary,
    /// Centered binomial error, σ ≈ 3.2, clamped to ±6σ.
    Error,
    /// Uniform residues, independently per prime (uniform mod Q by CRT).
    Uniform,
}

/// Degree and ordered prime chain shared by a family of ring elements.
#[derive(Debug)]
pub struct RingParams {
    pub degree: usize,
    pub primes: Vec<Arc<PrimeContext>>,
}

impl RingParams {
    /// Validate and build parameters from explicit prime values.
    pub fn new(degree: usize, prime_values: &[u64]) -> Result<Arc<Self>> {
        if !degree.is_power_of_two() || degree < 16 {
            return Err(Error::InvalidParams(format!(
                "degree {degree} must be a power of two >= 16"
            )));
        }
        if prime_values.is_empty() {
            return Err(Error::InvalidParams("empty prime chain".into()));
        }
        let two_n = 2 * degree as u64;
        for (i, &p) in prime_values.iter().enumerate() {
            if p >= (1 << 61) {
                return Err(Error::InvalidParams(format!("prime {p} exceeds 2^61")));
            }
            if p % two_n != 1 {
                return Err(Error::InvalidParams(format!(
                    "prime {p} is not 1 mod 2N (N = {degree})"
                )));
            }
            if !is_prime_u64(p) {
                return Err(Error::InvalidParams(format!("{p} is not prime")));
            }
            if prime_values[..i].contains(&p) {
                return Err(Error::InvalidParams(format!("duplicate prime {p}")));
            }
        }
        let primes = prime_values
            .par_iter()
            .map(|&p| Arc::new(PrimeContext::new(p, degree)))
            .collect();
        Ok(Arc::new(RingParams { degree, primes }))
    }

    /// Build from already-constructed prime contexts (shares NTT tables).
    pub fn from_contexts(degree: usize, primes: Vec<Arc<PrimeContext>>) -> Arc<Self> {
        Arc::new(RingParams { degree, primes })
    }

    pub fn chain_len(&self) -> usize {
        self.primes.len()
    }

    pub fn prime_values(&self) -> Vec<u64> {
        self.primes.iter().map(|c| c.p).collect()
    }

    /// Total bit width of the chain (sum of per-prime packed widths).
    pub fn total_bits(&self) -> u32 {
        self.primes.iter().map(|c| c.bits).sum()
    }
}

/// An element of R_q in RNS form: `rows[i]` holds the residues mod the
/// i-th active prime.
#[derive(Debug, Clone)]
pub struct RingPoly {
    pub(crate) params: Arc<RingParams>,
    pub(crate) rows: Vec<Vec<u64>>,
    pub(crate) domain: Domain,
}

impl PartialEq for RingPoly {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain
            && self.params.degree == other.params.degree
            && self.rows == other.rows
    }
}

impl RingPoly {
    pub fn zero(params: &Arc<RingParams>, active: usize, domain: Domain) -> Self {
        assert!(active >= 1 && active <= params.chain_len());
        RingPoly {
            params: params.clone(),
            rows: vec![vec![0u64; params.degree]; active],
            domain,
        }
    }

    /// Lift signed integer coefficients into every active residue row.
    pub fn from_signed(params: &Arc<RingParams>, active: usize, coeffs: &[i64]) -> Self {
        assert_eq!(coeffs.len(), params.degree);
        let rows = params.primes[..active]
            .iter()
            .map(|ctx| coeffs.iter().map(|&v| ctx.from_i64(v)).collect())
            .collect();
        RingPoly {
            params: params.clone(),
            rows,
            domain: Domain::Coefficient,
        }
    }

    pub fn sample<R: Rng + ?Sized>(
        params: &Arc<RingParams>,
        active: usize,
        kind: SampleKind,
        rng: &mut R,
    ) -> Self {
        match kind {
            SampleKind::Ternary => {
                let coeffs: Vec<i64> =
                    (0..params.degree).map(|_| rng.random_range(-1..=1)).collect();
                Self::from_signed(params, active, &coeffs)
            }
            SampleKind::Error => {
                let coeffs: Vec<i64> = (0..params.degree)
                    .map(|_| {
                        let bits = rng.next_u64();
                        let a = (bits & ((1 << CBD_BITS) - 1)).count_ones() as i64;
                        let b = ((bits >> CBD_BITS) & ((1 << CBD_BITS) - 1)).count_ones() as i64;
                        (a - b).clamp(-ERROR_CLAMP, ERROR_CLAMP)
                    })
                    .collect();
                Self::from_signed(params, active, &coeffs)
            }
            SampleKind::Uniform => {
                let rows = params.primes[..active]
                    .iter()
                    .map(|ctx| {
                        (0..params.degree)
                            .map(|_| rng.random_range(0..ctx.p))
                            .collect()
                    })
                    .collect();
                RingPoly {
                    params: params.clone(),
                    rows,
                    domain: Domain::Coefficient,
                }
            }
        }
    }

    pub fn degree(&self) -> usize {
        self.params.degree
    }

    pub fn active(&self) -> usize {
        self.rows.len()
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn params(&self) -> &Arc<RingParams> {
        &self.params
    }

    /// Residue rows, one per active prime.
    pub fn rows(&self) -> &[Vec<u64>] {
        &self.rows
    }

    fn check_match(&self, other: &Self) -> Result<()> {
        if !Arc::ptr_eq(&self.params, &other.params) || self.active() != other.active() {
            return Err(Error::ParamMismatch(format!(
                "chains differ: {} vs {} active primes",
                self.active(),
                other.active()
            )));
        }
        if self.domain != other.domain {
            return Err(Error::DomainMismatch(format!(
                "{:?} vs {:?}",
                self.domain, other.domain
            )));
        }
        Ok(())
    }

    /// Forward NTT; requires coefficient domain.
    pub fn ntt_forward(&self) -> Result<Self> {
        if self.domain != Domain::Coefficient {
            return Err(Error::DomainMismatch(
                "forward transform requires coefficient domain".into(),
            ));
        }
        let mut out = self.clone();
        out.rows
            .par_iter_mut()
            .zip(self.params.primes.par_iter())
            .for_each(|(row, ctx)| ctx.ntt_forward(row));
        out.domain = Domain::Evaluation;
        Ok(out)
    }

    /// Inverse NTT; requires evaluation domain.
    pub fn ntt_inverse(&self) -> Result<Self> {
        if self.domain != Domain::Evaluation {
            return Err(Error::DomainMismatch(
                "inverse transform requires evaluation domain".into(),
            ));
        }
        let mut out = self.clone();
        out.rows
            .par_iter_mut()
            .zip(self.params.primes.par_iter())
            .for_each(|(row, ctx)| ctx.ntt_inverse(row));
        out.domain = Domain::Coefficient;
        Ok(out)
    }

    /// Transform to evaluation domain if not already there.
    pub fn to_eval(&self) -> Result<Self> {
        match self.domain {
            Domain::Evaluation => Ok(self.clone()),
            Domain::Coefficient => self.ntt_forward(),
        }
    }

    /// Transform to coefficient domain if not already there.
    pub fn to_coeff(&self) -> Result<Self> {
        match self.domain {
            Domain::Coefficient => Ok(self.clone()),
            Domain::Evaluation => self.ntt_inverse(),
        }
    }

    fn zip_rows<F>(&self, other: &Self, f: F) -> Self
    where
        F: Fn(&PrimeContext, u64, u64) -> u64 + Sync,
    {
        let rows = self
            .rows
            .par_iter()
            .zip(other.rows.par_iter())
            .zip(self.params.primes.par_iter())
            .map(|((ra, rb), ctx)| {
                ra.iter()
                    .zip(rb.iter())
                    .map(|(&a, &b)| f(ctx, a, b))
                    .collect()
            })
            .collect();
        RingPoly {
            params: self.params.clone(),
            rows,
            domain: self.domain,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_match(other)?;
        Ok(self.zip_rows(other, |ctx, a, b| ctx.add(a, b)))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_match(other)?;
        Ok(self.zip_rows(other, |ctx, a, b| ctx.sub(a, b)))
    }

    pub fn negate(&self) -> Self {
        let rows = self
            .rows
            .iter()
            .zip(self.params.primes.iter())
            .map(|(row, ctx)| row.iter().map(|&a| ctx.negate(a)).collect())
            .collect();
        RingPoly {
            params: self.params.clone(),
            rows,
            domain: self.domain,
        }
    }

    /// Ring product. Coefficient-domain inputs are transformed internally;
    /// the result is returned in evaluation domain so long chains of
    /// products pay each transform once.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if !Arc::ptr_eq(&self.params, &other.params) || self.active() != other.active() {
            return Err(Error::ParamMismatch("mul across different chains".into()));
        }
        let a = self.to_eval()?;
        let b = other.to_eval()?;
        Ok(a.zip_rows(&b, |ctx, x, y| ctx.mul(x, y)))
    }

    /// Drop the last active prime, dividing coefficients by it with
    /// round-to-nearest (exact: odd primes admit no ties).
    pub fn drop_last_prime(&self) -> Result<Self> {
        if self.domain != Domain::Coefficient {
            return Err(Error::DomainMismatch(
                "drop_last_prime requires coefficient domain".into(),
            ));
        }
        if self.active() < 2 {
            return Err(Error::LevelExhausted(
                "cannot drop the only remaining prime".into(),
            ));
        }
        let last_idx = self.active() - 1;
        let last_ctx = &self.params.primes[last_idx];
        let last_row = &self.rows[last_idx];
        let rows: Vec<Vec<u64>> = self.rows[..last_idx]
            .par_iter()
            .zip(self.params.primes[..last_idx].par_iter())
            .map(|(row, ctx)| {
                let qinv = ctx.inv(ctx.reduce64(last_ctx.p % ctx.p));
                let qinv_shoup = ctx.shoup_of(qinv);
                row.iter()
                    .zip(last_row.iter())
                    .map(|(&a, &r)| {
                        let centered = last_ctx.to_centered(r);
                        let diff = ctx.sub(a, ctx.from_i64(centered));
                        ctx.mul_shoup(diff, qinv, qinv_shoup)
                    })
                    .collect()
            })
            .collect();
        Ok(RingPoly {
            params: self.params.clone(),
            rows,
            domain: self.domain,
        })
    }

    /// Drop the last residue row without dividing: reduces the element
    /// modulo the shorter chain. Valid in either domain.
    pub fn mod_drop_last(&self, count: usize) -> Result<Self> {
        if count >= self.active() {
            return Err(Error::LevelExhausted(format!(
                "cannot drop {count} of {} primes",
                self.active()
            )));
        }
        let mut out = self.clone();
        out.rows.truncate(self.active() - count);
        Ok(out)
    }

    /// Apply the Galois automorphism x -> x^g. Requires coefficient domain
    /// and odd g (invertible mod 2N).
    pub fn automorphism(&self, g: usize) -> Result<Self> {
        if self.domain != Domain::Coefficient {
            return Err(Error::DomainMismatch(
                "automorphism requires coefficient domain".into(),
            ));
        }
        let n = self.params.degree;
        let two_n = 2 * n;
        assert!(g % 2 == 1, "Galois element must be odd");
        let rows = self
            .rows
            .par_iter()
            .zip(self.params.primes.par_iter())
            .map(|(row, ctx)| {
                let mut out = vec![0u64; n];
                for (i, &v) in row.iter().enumerate() {
                    let e = (i * g) % two_n;
                    if e < n {
                        out[e] = v;
                    } else {
                        out[e - n] = ctx.negate(v);
                    }
                }
                out
            })
            .collect();
        Ok(RingPoly {
            params: self.params.clone(),
            rows,
            domain: self.domain,
        })
    }

    /// Reconstruct centered integer coefficients from the first `use_primes`
    /// residue rows (Garner mixed-radix CRT). Exact while the true value
    /// stays within ± half the product of those primes.
    pub fn to_centered_coeffs(&self, use_primes: usize) -> Result<Vec<i128>> {
        if self.domain != Domain::Coefficient {
            return Err(Error::DomainMismatch(
                "CRT reconstruction requires coefficient domain".into(),
            ));
        }
        let k = use_primes.min(self.active());
        let ctxs: Vec<&PrimeContext> = self.params.primes[..k].iter().map(|c| c.as_ref()).collect();
        let product: u128 = ctxs.iter().fold(1u128, |acc, c| acc * c.p as u128);
        let half = product / 2;
        let n = self.params.degree;
        let mut out = Vec::with_capacity(n);
        for j in 0..n {
            let mut digits = vec![0u64; k];
            for i in 0..k {
                let ctx = ctxs[i];
                let mut acc = 0u64;
                let mut base = 1u64;
                for (d, cprev) in digits[..i].iter().zip(&ctxs[..i]) {
                    acc = ctx.add(acc, ctx.mul(ctx.reduce64(*d), base));
                    base = ctx.mul(base, ctx.reduce64(cprev.p % ctx.p));
                }
                let t = ctx.sub(self.rows[i][j], acc);
                digits[i] = ctx.mul(t, ctx.inv(base));
            }
            let mut x = 0u128;
            let mut base = 1u128;
            for (d, c) in digits.iter().zip(&ctxs) {
                x += *d as u128 * base;
                base *= c.p as u128;
            }
            out.push(if x > half {
                -((product - x) as i128)
            } else {
                x as i128
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn small_params() -> Arc<RingParams> {
        let p0 = super::super::prime::next_ntt_prime(17, 16, 0);
        let p1 = super::super::prime::next_ntt_prime(20, 16, 0);
        RingParams::new(16, &[p0, p1]).unwrap()
    }

    /// Schoolbook negacyclic product over one prime, the independent
    /// oracle for `mul`.
    fn schoolbook_negacyclic(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
        let n = a.len();
        let mut acc = vec![0i128; n];
        for i in 0..n {
            for j in 0..n {
                let prod = a[i] as i128 * b[j] as i128 % p as i128;
                if i + j < n {
                    acc[i + j] += prod;
                } else {
                    acc[i + j - n] -= prod;
                }
            }
        }
        acc.iter()
            .map(|&v| (v.rem_euclid(p as i128)) as u64)
            .collect()
    }

    #[test]
    fn ntt_round_trip_identity_100_random() {
        let p = super::super::prime::next_ntt_prime(17, 16, 0);
        let params = RingParams::new(16, &[p]).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..100 {
            let a = RingPoly::sample(&params, 1, SampleKind::Uniform, &mut rng);
            let round = a.ntt_forward().unwrap().ntt_inverse().unwrap();
            assert_eq!(a, round);
        }
    }

    #[test]
    fn ntt_of_zero_is_zero() {
        let params = small_params();
        let z = RingPoly::zero(&params, 2, Domain::Coefficient);
        let f = z.ntt_forward().unwrap();
        assert!(f.rows.iter().all(|r| r.iter().all(|&v| v == 0)));
    }

    #[test]
    fn ntt_domain_mismatch_errors() {
        let params = small_params();
        let z = RingPoly::zero(&params, 2, Domain::Coefficient);
        let f = z.ntt_forward().unwrap();
        assert!(matches!(f.ntt_forward(), Err(Error::DomainMismatch(_))));
        assert!(matches!(z.ntt_inverse(), Err(Error::DomainMismatch(_))));
    }

    #[test]
    fn square_of_one_is_one() {
        let params = small_params();
        let mut coeffs = vec![0i64; 16];
        coeffs[0] = 1;
        let one = RingPoly::from_signed(&params, 2, &coeffs);
        let sq = one.mul(&one).unwrap().to_coeff().unwrap();
        assert_eq!(sq, one);
    }

    #[test]
    fn mul_one_plus_x_squared() {
        // (1 + x)^2 = 1 + 2x + x^2 at N = 16 (no wraparound)
        let params = small_params();
        let mut c = vec![0i64; 16];
        c[0] = 1;
        c[1] = 1;
        let a = RingPoly::from_signed(&params, 2, &c);
        let prod = a.mul(&a).unwrap().to_coeff().unwrap();
        let mut expect = vec![0i64; 16];
        expect[0] = 1;
        expect[1] = 2;
        expect[2] = 1;
        assert_eq!(prod, RingPoly::from_signed(&params, 2, &expect));
    }

    #[test]
    fn mul_matches_schoolbook_oracle() {
        for n in [16usize, 32, 64] {
            let p = super::super::prime::next_ntt_prime(19, n, 0);
            let params = RingParams::new(n, &[p]).unwrap();
            let mut rng = ChaCha20Rng::seed_from_u64(n as u64);
            for _ in 0..20 {
                let a = RingPoly::sample(&params, 1, SampleKind::Uniform, &mut rng);
                let b = RingPoly::sample(&params, 1, SampleKind::Uniform, &mut rng);
                let prod = a.mul(&b).unwrap().to_coeff().unwrap();
                let oracle = schoolbook_negacyclic(&a.rows[0], &b.rows[0], p);
                assert_eq!(prod.rows[0], oracle);
            }
        }
    }

    #[test]
    fn mul_identity_and_add_sub_negate() {
        let params = small_params();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let a = RingPoly::sample(&params, 2, SampleKind::Uniform, &mut rng);
        let zero = RingPoly::zero(&params, 2, Domain::Coefficient);
        assert_eq!(a.add(&zero).unwrap(), a);
        let diff = a.sub(&a).unwrap();
        assert_eq!(diff, zero);
        assert_eq!(a.negate().negate(), a);
    }

    #[test]
    fn param_mismatch_rejected() {
        let params = small_params();
        let a = RingPoly::zero(&params, 2, Domain::Coefficient);
        let b = RingPoly::zero(&params, 1, Domain::Coefficient);
        assert!(matches!(a.add(&b), Err(Error::ParamMismatch(_))));
        let c = RingPoly::zero(&params, 2, Domain::Evaluation);
        assert!(matches!(a.add(&c), Err(Error::DomainMismatch(_))));
    }

    #[test]
    fn drop_last_prime_exact_multiples() {
        let params = small_params();
        let q_last = params.primes[1].p;
        // coefficients k * q_last should divide exactly to k
        let coeffs: Vec<i64> = (0..16).map(|k| (k as i64 - 8) * q_last as i64).collect();
        let a = RingPoly::from_signed(&params, 2, &coeffs);
        let dropped = a.drop_last_prime().unwrap();
        let expect: Vec<i64> = (0..16).map(|k| k as i64 - 8).collect();
        let expect_poly = RingPoly::from_signed(&params, 1, &expect);
        assert_eq!(dropped.rows, expect_poly.rows);
    }

    #[test]
    fn drop_last_prime_zero_polynomial() {
        let params = small_params();
        let z = RingPoly::zero(&params, 2, Domain::Coefficient);
        let dropped = z.drop_last_prime().unwrap();
        assert_eq!(dropped.active(), 1);
        assert!(dropped.rows[0].iter().all(|&v| v == 0));
    }

    #[test]
    fn drop_last_prime_matches_round_divide_oracle() {
        let params = small_params();
        let q_last = params.primes[1].p as i128;
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for _ in 0..50 {
            let a = RingPoly::sample(&params, 2, SampleKind::Uniform, &mut rng);
            let dropped = a.drop_last_prime().unwrap();
            // oracle: reconstruct the integer, divide with rounding
            let ints = a.to_centered_coeffs(2).unwrap();
            for (j, &v) in ints.iter().enumerate() {
                // round half away from zero; ties cannot occur (odd prime)
                let q = if v >= 0 {
                    (v + q_last / 2) / q_last
                } else {
                    -((-v + q_last / 2) / q_last)
                };
                let ctx = &params.primes[0];
                assert_eq!(
                    dropped.rows[0][j],
                    ctx.from_i64(q as i64),
                    "coefficient {j}: int {v}"
                );
            }
        }
    }

    #[test]
    fn drop_last_prime_requires_two_primes() {
        let params = small_params();
        let a = RingPoly::zero(&params, 1, Domain::Coefficient);
        assert!(matches!(a.drop_last_prime(), Err(Error::LevelExhausted(_))));
    }

    #[test]
    fn sample_ternary_range_and_determinism() {
        let params = small_params();
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let a = RingPoly::sample(&params, 2, SampleKind::Ternary, &mut rng);
        for (row, ctx) in a.rows.iter().zip(&params.primes) {
            for &v in row {
                assert!(v == 0 || v == 1 || v == ctx.p - 1, "non-ternary residue {v}");
            }
        }
        let mut rng2 = ChaCha20Rng::seed_from_u64(42);
        let b = RingPoly::sample(&params, 2, SampleKind::Ternary, &mut rng2);
        assert_eq!(a, b);
    }

    #[test]
    fn sample_error_sigma_within_10_percent() {
        let p = super::super::prime::next_ntt_prime(24, 1 << 14, 0);
        let params = RingParams::new(1 << 14, &[p]).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let e = RingPoly::sample(&params, 1, SampleKind::Error, &mut rng);
        let ctx = &params.primes[0];
        let vals: Vec<f64> = e.rows[0].iter().map(|&v| ctx.to_centered(v) as f64).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        let sigma = var.sqrt();
        assert!(
            (sigma - ERROR_SIGMA).abs() / ERROR_SIGMA < 0.10,
            "empirical sigma {sigma}"
        );
        assert!(vals.iter().all(|v| v.abs() <= 6.0 * ERROR_SIGMA));
    }

    #[test]
    fn automorphism_permutes_with_signs() {
        // x -> x^3 at N=4... use N=16: coefficient i lands at i*g mod 2N
        let params = small_params();
        let mut c = vec![0i64; 16];
        c[6] = 1; // x^6
        let a = RingPoly::from_signed(&params, 2, &c);
        let b = a.automorphism(3).unwrap();
        // 6*3 = 18 = 16 + 2 -> -x^2
        let mut expect = vec![0i64; 16];
        expect[2] = -1;
        assert_eq!(b, RingPoly::from_signed(&params, 2, &expect));
    }

    #[test]
    fn centered_reconstruction_round_trips() {
        let params = small_params();
        let coeffs: Vec<i64> = (0..16).map(|i| (i as i64 - 8) * 12345).collect();
        let a = RingPoly::from_signed(&params, 2, &coeffs);
        let ints = a.to_centered_coeffs(2).unwrap();
        for (&c, &v) in coeffs.iter().zip(&ints) {
            assert_eq!(c as i128, v);
        }
    }
}
