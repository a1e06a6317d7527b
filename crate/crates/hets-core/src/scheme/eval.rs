//! Homomorphic evaluation: encrypt/decrypt and the ciphertext primitives.
//!
//! Level bookkeeping: a ciphertext at level ℓ spans the first ℓ+1 chain
//! primes. Rescaling drops the last active prime and requires at least two
//! primes to remain afterwards — the decryption floor — so a fresh
//! ciphertext over an L-prime chain supports exactly L−2 auto-rescaled
//! multiplications before `LevelExhausted`.
//!
//! Scale bookkeeping is exact: every ciphertext carries its scale as f64
//! and additions require agreement within a relative 2^-30.

use std::sync::Arc;

use rand::Rng;

use super::encoding::{galois_element, Encoder, Plaintext};
use super::keys::{key_switch, GaloisKeys, PublicKey, RelinKey, SecretKey, SwitchKey};
use super::params::SchemeParams;
use crate::error::{Error, Result};
use crate::ring::{RingPoly, SampleKind};

/// Scales are considered equal within a relative 2^-30.
pub fn scales_match(a: f64, b: f64) -> bool {
    (a / b - 1.0).abs() <= (2f64).powi(-30)
}

/// An RLWE ciphertext: two (transiently three) ring elements in NTT form,
/// plus scale and level metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Ciphertext {
    pub(crate) parts: Vec<RingPoly>,
    pub scale: f64,
    pub level: usize,
}

impl Ciphertext {
    /// Assemble a ciphertext from evaluation-domain parts; the normal
    /// construction paths are `encrypt` and the evaluator, but wire
    /// adoption and tests need the raw form.
    pub fn from_parts(parts: Vec<RingPoly>, scale: f64, level: usize) -> Result<Ciphertext> {
        if parts.is_empty() || parts.len() > 3 {
            return Err(Error::ParamMismatch(format!(
                "ciphertext must have 1..=3 parts, got {}",
                parts.len()
            )));
        }
        for p in &parts {
            if p.active() != level + 1 {
                return Err(Error::ParamMismatch(format!(
                    "part spans {} primes, level {level} needs {}",
                    p.active(),
                    level + 1
                )));
            }
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::ParamMismatch(format!("bad scale {scale}")));
        }
        Ok(Ciphertext {
            parts,
            scale,
            level,
        })
    }

    /// Part count: 2 after any relinearized operation.
    pub fn size(&self) -> usize {
        self.parts.len()
    }

    /// Active primes at this level.
    pub fn active_primes(&self) -> usize {
        self.level + 1
    }

    /// Auto-rescaled multiplications still available (floor of two primes).
    pub fn remaining_levels(&self) -> usize {
        self.level.saturating_sub(1)
    }
}

/// Stateless evaluation engine bound to one parameter set.
pub struct Evaluator {
    pub params: Arc<SchemeParams>,
    pub encoder: Arc<Encoder>,
    pub auto_rescale: bool,
    pub auto_relin: bool,
}

impl Evaluator {
    pub fn new(params: Arc<SchemeParams>) -> Self {
        let encoder = Arc::new(Encoder::new(params.degree()));
        Evaluator {
            params,
            encoder,
            auto_rescale: true,
            auto_relin: true,
        }
    }

    pub fn encode(&self, values: &[f64], level: usize, scale: f64) -> Result<Plaintext> {
        if level > self.params.top_level() {
            return Err(Error::LevelMismatch {
                left: level,
                right: self.params.top_level(),
            });
        }
        self.encoder.encode(values, &self.params.ring, level, scale)
    }

    pub fn decode(&self, pt: &Plaintext) -> Result<Vec<f64>> {
        self.encoder.decode(pt)
    }

    pub fn encrypt<R: Rng + ?Sized>(
        &self,
        pt: &Plaintext,
        pk: &PublicKey,
        rng: &mut R,
    ) -> Result<Ciphertext> {
        let active = pt.level + 1;
        if active > self.params.chain_len() {
            return Err(Error::LevelMismatch {
                left: pt.level,
                right: self.params.top_level(),
            });
        }
        let chain = &self.params.ring;
        let drop = self.params.chain_len() - active;
        let b = pk.b.mod_drop_last(drop).unwrap_or_else(|_| pk.b.clone());
        let a = pk.a.mod_drop_last(drop).unwrap_or_else(|_| pk.a.clone());
        let u = RingPoly::sample(chain, active, SampleKind::Ternary, rng).ntt_forward()?;
        let e0 = RingPoly::sample(chain, active, SampleKind::Error, rng).ntt_forward()?;
        let e1 = RingPoly::sample(chain, active, SampleKind::Error, rng).ntt_forward()?;
        let m = pt.poly.ntt_forward()?;
        let c0 = b.mul(&u)?.add(&e0)?.add(&m)?;
        let c1 = a.mul(&u)?.add(&e1)?;
        Ok(Ciphertext {
            parts: vec![c0, c1],
            scale: pt.scale,
            level: pt.level,
        })
    }

    pub fn decrypt(&self, ct: &Ciphertext, sk: &SecretKey) -> Result<Plaintext> {
        let drop = self.params.chain_len() - ct.active_primes();
        let s = if drop > 0 {
            sk.eval_chain.mod_drop_last(drop)?
        } else {
            sk.eval_chain.clone()
        };
        let mut acc = ct.parts[0].add(&ct.parts[1].mul(&s)?)?;
        if ct.parts.len() == 3 {
            let s2 = s.mul(&s)?;
            acc = acc.add(&ct.parts[2].mul(&s2)?)?;
        }
        Ok(Plaintext {
            poly: acc.ntt_inverse()?,
            scale: ct.scale,
            level: ct.level,
        })
    }

    fn check_binary(&self, a: &Ciphertext, b: &Ciphertext) -> Result<()> {
        if a.level != b.level {
            return Err(Error::LevelMismatch {
                left: a.level,
                right: b.level,
            });
        }
        if !scales_match(a.scale, b.scale) {
            return Err(Error::ScaleMismatch {
                left: a.scale,
                right: b.scale,
            });
        }
        Ok(())
    }

    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.check_binary(a, b)?;
        let size = a.parts.len().max(b.parts.len());
        let mut parts = Vec::with_capacity(size);
        for i in 0..size {
            parts.push(match (a.parts.get(i), b.parts.get(i)) {
                (Some(x), Some(y)) => x.add(y)?,
                (Some(x), None) => x.clone(),
                (None, Some(y)) => y.clone(),
                (None, None) => unreachable!(),
            });
        }
        Ok(Ciphertext {
            parts,
            scale: a.scale,
            level: a.level,
        })
    }

    pub fn sub(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        self.add(a, &self.negate(b))
    }

    pub fn negate(&self, a: &Ciphertext) -> Ciphertext {
        Ciphertext {
            parts: a.parts.iter().map(|p| p.negate()).collect(),
            scale: a.scale,
            level: a.level,
        }
    }

    /// Add an encoded operand; level and scale must agree.
    pub fn add_plain_pt(&self, a: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
        if a.level != pt.level {
            return Err(Error::LevelMismatch {
                left: a.level,
                right: pt.level,
            });
        }
        if !scales_match(a.scale, pt.scale) {
            return Err(Error::ScaleMismatch {
                left: a.scale,
                right: pt.scale,
            });
        }
        let mut parts = a.parts.clone();
        parts[0] = parts[0].add(&pt.poly.ntt_forward()?)?;
        Ok(Ciphertext {
            parts,
            scale: a.scale,
            level: a.level,
        })
    }

    /// Add plain values, encoded at the ciphertext's level and scale.
    pub fn add_plain(&self, a: &Ciphertext, values: &[f64]) -> Result<Ciphertext> {
        let pt = self.encode(values, a.level, a.scale)?;
        self.add_plain_pt(a, &pt)
    }

    pub fn sub_plain(&self, a: &Ciphertext, values: &[f64]) -> Result<Ciphertext> {
        let neg: Vec<f64> = values.iter().map(|v| -v).collect();
        self.add_plain(a, &neg)
    }

    fn check_scale_budget(&self, scale: f64, level: usize) -> Result<()> {
        let budget: f64 = self.params.ring.primes[..level + 1]
            .iter()
            .map(|c| (c.p as f64).log2())
            .sum();
        if scale.log2() > budget - 2.0 {
            return Err(Error::ScaleOverflow { scale, level });
        }
        Ok(())
    }

    /// Ciphertext product with relinearization and rescaling per the
    /// evaluator flags.
    pub fn mul(&self, a: &Ciphertext, b: &Ciphertext, rlk: Option<&RelinKey>) -> Result<Ciphertext> {
        if a.size() != 2 || b.size() != 2 {
            return Err(Error::ParamMismatch(
                "multiplication requires size-2 ciphertexts; relinearize first".into(),
            ));
        }
        // products only need level agreement; scales multiply
        if a.level != b.level {
            return Err(Error::LevelMismatch {
                left: a.level,
                right: b.level,
            });
        }
        if self.auto_rescale && a.level < 2 {
            return Err(Error::LevelExhausted(format!(
                "multiplication at level {} cannot rescale (two-prime floor)",
                a.level
            )));
        }
        let scale = a.scale * b.scale;
        self.check_scale_budget(scale, a.level)?;

        let d0 = a.parts[0].mul(&b.parts[0])?;
        let d1 = a.parts[0].mul(&b.parts[1])?.add(&a.parts[1].mul(&b.parts[0])?)?;
        let d2 = a.parts[1].mul(&b.parts[1])?;

        let mut ct = if self.auto_relin {
            let rlk = rlk.ok_or_else(|| Error::MissingKey("relinearization key".into()))?;
            let (kb, ka) = key_switch(&self.params, &d2.ntt_inverse()?, &rlk.0)?;
            Ciphertext {
                parts: vec![d0.add(&kb.ntt_forward()?)?, d1.add(&ka.ntt_forward()?)?],
                scale,
                level: a.level,
            }
        } else {
            Ciphertext {
                parts: vec![d0, d1, d2],
                scale,
                level: a.level,
            }
        };
        if self.auto_rescale {
            ct = self.rescale(&ct)?;
        }
        Ok(ct)
    }

    /// Reduce a size-3 ciphertext back to size 2.
    pub fn relinearize(&self, ct: &Ciphertext, rlk: &RelinKey) -> Result<Ciphertext> {
        if ct.size() == 2 {
            return Ok(ct.clone());
        }
        let (kb, ka) = key_switch(&self.params, &ct.parts[2].ntt_inverse()?, &rlk.0)?;
        Ok(Ciphertext {
            parts: vec![
                ct.parts[0].add(&kb.ntt_forward()?)?,
                ct.parts[1].add(&ka.ntt_forward()?)?,
            ],
            scale: ct.scale,
            level: ct.level,
        })
    }

    /// Raw plain product: multiply by `values` encoded at `pt_scale`.
    /// No rescale; the output scale is the product of the scales.
    pub fn mul_plain_raw(
        &self,
        a: &Ciphertext,
        values: &[f64],
        pt_scale: f64,
    ) -> Result<Ciphertext> {
        self.check_scale_budget(a.scale * pt_scale, a.level)?;
        let pt = self.encode(values, a.level, pt_scale)?;
        let m = pt.poly.ntt_forward()?;
        Ok(Ciphertext {
            parts: a.parts.iter().map(|p| p.mul(&m)).collect::<Result<_>>()?,
            scale: a.scale * pt_scale,
            level: a.level,
        })
    }

    /// Flag-driven plain product. With auto-rescale the plaintext is
    /// encoded at the prime about to be dropped, so the output scale equals
    /// the input scale; without it the plaintext is encoded at Δ and the
    /// caller rescales.
    pub fn mul_plain(&self, a: &Ciphertext, values: &[f64]) -> Result<Ciphertext> {
        if self.auto_rescale {
            if a.level < 2 {
                return Err(Error::LevelExhausted(format!(
                    "multiplication at level {} cannot rescale (two-prime floor)",
                    a.level
                )));
            }
            let pt_scale = self.params.prime_f64(a.level);
            let prod = self.mul_plain_raw(a, values, pt_scale)?;
            self.rescale(&prod)
        } else {
            self.mul_plain_raw(a, values, self.params.scale)
        }
    }

    /// Multiply by an operand the caller already encoded. Levels and the
    /// scale budget are checked; the product keeps the summed scale.
    pub fn mul_plain_pt(&self, a: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext> {
        if a.level != pt.level {
            return Err(Error::LevelMismatch {
                left: a.level,
                right: pt.level,
            });
        }
        self.check_scale_budget(a.scale * pt.scale, a.level)?;
        let m = pt.poly.ntt_forward()?;
        let mut ct = Ciphertext {
            parts: a.parts.iter().map(|p| p.mul(&m)).collect::<Result<_>>()?,
            scale: a.scale * pt.scale,
            level: a.level,
        };
        if self.auto_rescale {
            ct = self.rescale(&ct)?;
        }
        Ok(ct)
    }

    /// Drop the last active prime, dividing the scale by it. Requires at
    /// least two primes to remain afterwards.
    pub fn rescale(&self, ct: &Ciphertext) -> Result<Ciphertext> {
        if ct.level < 2 {
            return Err(Error::LevelExhausted(format!(
                "rescale at level {} would leave fewer than two active primes",
                ct.level
            )));
        }
        let dropped = self.params.prime_f64(ct.level);
        let parts: Result<Vec<RingPoly>> = ct
            .parts
            .iter()
            .map(|p| p.ntt_inverse()?.drop_last_prime()?.ntt_forward())
            .collect();
        Ok(Ciphertext {
            parts: parts?,
            scale: ct.scale / dropped,
            level: ct.level - 1,
        })
    }

    /// Truncate `count` primes without division (level alignment; lossless).
    pub fn mod_drop(&self, ct: &Ciphertext, count: usize) -> Result<Ciphertext> {
        if count == 0 {
            return Ok(ct.clone());
        }
        if count > ct.level {
            return Err(Error::LevelExhausted(format!(
                "cannot drop {count} levels from level {}",
                ct.level
            )));
        }
        let parts: Result<Vec<RingPoly>> =
            ct.parts.iter().map(|p| p.mod_drop_last(count)).collect();
        Ok(Ciphertext {
            parts: parts?,
            scale: ct.scale,
            level: ct.level - count,
        })
    }

    /// Rotate slots left by `steps` (cyclically; negative rotates right).
    pub fn rotate(&self, ct: &Ciphertext, steps: i64, gks: &GaloisKeys) -> Result<Ciphertext> {
        if ct.size() != 2 {
            return Err(Error::ParamMismatch(
                "rotation requires a size-2 ciphertext".into(),
            ));
        }
        let plan = gks.plan(steps)?;
        let mut out = ct.clone();
        for step in plan {
            let key = gks.key(step).ok_or(Error::MissingGaloisKey(steps))?;
            out = self.rotate_once(&out, step, key)?;
        }
        Ok(out)
    }

    fn rotate_once(&self, ct: &Ciphertext, step: usize, key: &SwitchKey) -> Result<Ciphertext> {
        let g = galois_element(step, self.params.degree());
        let c0 = ct.parts[0].ntt_inverse()?.automorphism(g)?;
        let c1 = ct.parts[1].ntt_inverse()?.automorphism(g)?;
        let (kb, ka) = key_switch(&self.params, &c1, key)?;
        Ok(Ciphertext {
            parts: vec![c0.add(&kb)?.ntt_forward()?, ka.ntt_forward()?],
            scale: ct.scale,
            level: ct.level,
        })
    }
}
