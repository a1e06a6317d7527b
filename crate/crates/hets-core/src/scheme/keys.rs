//! Key material and hybrid RNS key switching.
//!
//! Key-switching keys are generated per decomposition digit: at level ℓ a
//! polynomial d is decomposed into its residue rows d_i = [d] mod q_i,
//! each digit is extended to the basis {q_0..q_ℓ, p_aux} and multiplied
//! against the digit's key, and the accumulated pair is divided by the
//! 60-bit auxiliary prime with rounding. The division shrinks the
//! key-switching noise to O(1) per coefficient.
//!
//! Digit i's key encrypts p_aux · B_i · s̃ under s, where B_i is the CRT
//! basis element (1 mod q_i, 0 elsewhere): since B_i reduces consistently
//! under chain truncation, one key set serves every level.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use super::encoding::galois_element;
use super::params::SchemeParams;
use crate::error::{Error, Result};
use crate::ring::{Domain, RingPoly, SampleKind};

/// Ternary secret key; kept as signed coefficients so residue rows can be
/// derived over any prime basis.
#[derive(Debug)]
pub struct SecretKey {
    pub(crate) coeffs: Vec<i8>,
    /// NTT form over the ciphertext chain.
    pub(crate) eval_chain: RingPoly,
    /// NTT form over chain + auxiliary prime.
    pub(crate) eval_key: RingPoly,
}

/// Encryption key pair (b, a) with b = -a·s + e over the full chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PublicKey {
    pub(crate) b: RingPoly,
    pub(crate) a: RingPoly,
}

/// One decomposition digit of a key-switching key. Rows follow the key
/// ring's prime order (chain primes, then the auxiliary prime), NTT form.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SwitchKeyDigit {
    pub(crate) b: Vec<Vec<u64>>,
    pub(crate) a: Vec<Vec<u64>>,
}

/// Key-switching key: one digit per chain prime.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchKey {
    pub(crate) digits: Vec<SwitchKeyDigit>,
}

/// Relinearization key: switches s² terms back to s.
#[derive(Debug, Clone, PartialEq)]
pub struct RelinKey(pub(crate) SwitchKey);

/// Galois keys, one per supported left-rotation step (normalized to
/// [1, slot_count)).
#[derive(Debug, Clone, PartialEq)]
pub struct GaloisKeys {
    pub(crate) slots: usize,
    pub(crate) keys: BTreeMap<usize, SwitchKey>,
}

impl GaloisKeys {
    /// The supported normalized steps, ascending.
    pub fn supported_steps(&self) -> Vec<usize> {
        self.keys.keys().copied().collect()
    }

    pub fn key(&self, step: usize) -> Option<&SwitchKey> {
        self.keys.get(&step)
    }

    /// Rotation plan for a signed step: either the exact key or a
    /// power-of-two decomposition of the equivalent left rotation.
    pub fn plan(&self, step: i64) -> Result<Vec<usize>> {
        plan_rotation(self.slots, |s| self.keys.contains_key(&s), step)
    }
}

impl SecretKey {
    /// Ternary coefficients as stored (for serialization).
    pub(crate) fn ternary_coeffs(&self) -> &[i8] {
        &self.coeffs
    }

    /// Rebuild the NTT forms from ternary coefficients (deserialization).
    pub(crate) fn from_coeffs(params: &SchemeParams, coeffs: Vec<i8>) -> Result<SecretKey> {
        let chain_len = params.chain_len();
        let signed: Vec<i64> = coeffs.iter().map(|&v| v as i64).collect();
        Ok(SecretKey {
            eval_chain: RingPoly::from_signed(&params.ring, chain_len, &signed).ntt_forward()?,
            eval_key: RingPoly::from_signed(&params.key_ring, chain_len + 1, &signed)
                .ntt_forward()?,
            coeffs,
        })
    }
}

/// Decompose a signed rotation into supported left steps. `step` is
/// interpreted cyclically over the slot count; positive is left.
pub fn plan_rotation(
    slots: usize,
    has_key: impl Fn(usize) -> bool,
    step: i64,
) -> Result<Vec<usize>> {
    let r = step.rem_euclid(slots as i64) as usize;
    if r == 0 {
        return Ok(vec![]);
    }
    if has_key(r) {
        return Ok(vec![r]);
    }
    let mut plan = Vec::new();
    let mut rest = r;
    let mut bit = 1usize;
    while rest > 0 {
        if rest & 1 == 1 {
            if !has_key(bit) {
                return Err(Error::MissingGaloisKey(step));
            }
            plan.push(bit);
        }
        rest >>= 1;
        bit <<= 1;
    }
    Ok(plan)
}

fn automorph_signed(coeffs: &[i64], g: usize) -> Vec<i64> {
    let n = coeffs.len();
    let two_n = 2 * n;
    let mut out = vec![0i64; n];
    for (i, &v) in coeffs.iter().enumerate() {
        let e = (i * g) % two_n;
        if e < n {
            out[e] = v;
        } else {
            out[e - n] = -v;
        }
    }
    out
}

/// Generate all key material: secret, public, relinearization and Galois
/// keys for the requested rotation steps.
pub fn keygen<R: Rng + ?Sized>(
    params: &SchemeParams,
    rotation_steps: &[i64],
    rng: &mut R,
) -> Result<(SecretKey, PublicKey, RelinKey, GaloisKeys)> {
    let chain = &params.ring;
    let kr = &params.key_ring;
    let chain_len = chain.chain_len();
    let slots = params.slot_count();

    let s_coeffs: Vec<i8> = (0..params.degree())
        .map(|_| rng.random_range(-1i8..=1))
        .collect();
    let s_signed: Vec<i64> = s_coeffs.iter().map(|&v| v as i64).collect();
    let sk = SecretKey {
        eval_chain: RingPoly::from_signed(chain, chain_len, &s_signed).ntt_forward()?,
        eval_key: RingPoly::from_signed(kr, chain_len + 1, &s_signed).ntt_forward()?,
        coeffs: s_coeffs,
    };

    let a = RingPoly::sample(chain, chain_len, SampleKind::Uniform, rng).ntt_forward()?;
    let e = RingPoly::sample(chain, chain_len, SampleKind::Error, rng).ntt_forward()?;
    let b = a.mul(&sk.eval_chain)?.negate().add(&e)?;
    let pk = PublicKey { b, a };

    let s2 = sk.eval_key.mul(&sk.eval_key)?;
    let rlk = RelinKey(gen_switch_key(params, &sk, &s2, rng)?);

    let mut keys = BTreeMap::new();
    for &step in rotation_steps {
        if step == 0 || step.unsigned_abs() as usize >= slots {
            return Err(Error::InvalidRotationStep(step));
        }
        let r = step.rem_euclid(slots as i64) as usize;
        if keys.contains_key(&r) {
            continue;
        }
        let g = galois_element(r, params.degree());
        let rotated = automorph_signed(&s_signed, g);
        let s_rot = RingPoly::from_signed(kr, chain_len + 1, &rotated).ntt_forward()?;
        keys.insert(r, gen_switch_key(params, &sk, &s_rot, rng)?);
    }
    Ok((sk, pk, rlk, GaloisKeys { slots, keys }))
}

/// Switching key that moves `s_tilde`-terms to `sk`-terms.
fn gen_switch_key<R: Rng + ?Sized>(
    params: &SchemeParams,
    sk: &SecretKey,
    s_tilde: &RingPoly,
    rng: &mut R,
) -> Result<SwitchKey> {
    let kr = &params.key_ring;
    let chain_len = params.chain_len();
    let aux = params.aux_prime().p;
    let mut digits = Vec::with_capacity(chain_len);
    for i in 0..chain_len {
        let a = RingPoly::sample(kr, chain_len + 1, SampleKind::Uniform, rng).ntt_forward()?;
        let e = RingPoly::sample(kr, chain_len + 1, SampleKind::Error, rng).ntt_forward()?;
        let mut b = a.mul(&sk.eval_key)?.negate().add(&e)?;
        // add p_aux · s̃ on the digit's own row (B_i vanishes elsewhere)
        let ctx = &params.ring.primes[i];
        let f = ctx.reduce64(aux % ctx.p);
        let f_shoup = ctx.shoup_of(f);
        for (dst, &src) in b.rows[i].iter_mut().zip(s_tilde.rows[i].iter()) {
            *dst = ctx.add(*dst, ctx.mul_shoup(src, f, f_shoup));
        }
        digits.push(SwitchKeyDigit {
            b: b.rows,
            a: a.rows,
        });
    }
    Ok(SwitchKey { digits })
}

/// Key-switch a coefficient-domain polynomial: returns the (b, a) pair,
/// coefficient domain, to be added to a ciphertext so that d·s̃ becomes an
/// s-term. Works at any active level of the chain.
pub(crate) fn key_switch(
    params: &SchemeParams,
    d: &RingPoly,
    swk: &SwitchKey,
) -> Result<(RingPoly, RingPoly)> {
    if d.domain() != Domain::Coefficient {
        return Err(Error::DomainMismatch(
            "key switching expects coefficient domain".into(),
        ));
    }
    let active = d.active();
    let n = d.degree();
    let chain_len = params.chain_len();
    let aux_ctx = params.aux_prime().clone();

    // (key row index, prime context) per target prime
    let mut targets: Vec<(usize, std::sync::Arc<crate::ring::PrimeContext>)> = (0..active)
        .map(|i| (i, params.ring.primes[i].clone()))
        .collect();
    targets.push((chain_len, aux_ctx.clone()));

    let rows: Vec<(Vec<u64>, Vec<u64>)> = targets
        .par_iter()
        .map(|(key_row, ctx)| {
            let mut acc_b = vec![0u64; n];
            let mut acc_a = vec![0u64; n];
            for (i, row) in d.rows.iter().enumerate().take(active) {
                let mut digit: Vec<u64> = row.iter().map(|&v| ctx.reduce64(v)).collect();
                ctx.ntt_forward(&mut digit);
                let kb = &swk.digits[i].b[*key_row];
                let ka = &swk.digits[i].a[*key_row];
                for j in 0..n {
                    acc_b[j] = ctx.add(acc_b[j], ctx.mul(digit[j], kb[j]));
                    acc_a[j] = ctx.add(acc_a[j], ctx.mul(digit[j], ka[j]));
                }
            }
            ctx.ntt_inverse(&mut acc_b);
            ctx.ntt_inverse(&mut acc_a);
            (acc_b, acc_a)
        })
        .collect();

    // divide by the auxiliary prime with rounding
    let (aux_b, aux_a) = &rows[active];
    let divided: Vec<(Vec<u64>, Vec<u64>)> = rows[..active]
        .par_iter()
        .zip(params.ring.primes[..active].par_iter())
        .map(|((rb, ra), ctx)| {
            let inv_aux = ctx.inv(ctx.reduce64(aux_ctx.p % ctx.p));
            let inv_shoup = ctx.shoup_of(inv_aux);
            let div = |row: &[u64], aux_row: &[u64]| -> Vec<u64> {
                row.iter()
                    .zip(aux_row.iter())
                    .map(|(&v, &w)| {
                        let centered = aux_ctx.to_centered(w);
                        let adj = ctx.sub(v, ctx.from_i64(centered));
                        ctx.mul_shoup(adj, inv_aux, inv_shoup)
                    })
                    .collect()
            };
            (div(rb, aux_b), div(ra, aux_a))
        })
        .collect();

    let mut b_rows = Vec::with_capacity(active);
    let mut a_rows = Vec::with_capacity(active);
    for (rb, ra) in divided {
        b_rows.push(rb);
        a_rows.push(ra);
    }
    let wrap = |rows: Vec<Vec<u64>>| RingPoly {
        params: params.ring.clone(),
        rows,
        domain: Domain::Coefficient,
    };
    Ok((wrap(b_rows), wrap(a_rows)))
}
