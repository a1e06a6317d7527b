//! Scheme parameter sets: the ciphertext modulus chain, the encoding scale
//! and the auxiliary key-switching prime.
//!
//! Two presets ship:
//!
//! - `mnist-8192`: N = 8192, Δ = 2^21, chain bit pattern
//!   [31, 25, 25, 25, 25, 25, 25, 25] (206 bits total). Seven 25-bit
//!   primes above the scale leave enough rescale headroom for the
//!   six-multiplication CNN pipeline.
//! - `test-4096`: N = 4096, Δ = 2^30, chain bit pattern [40, 40, 30, 30]
//!   (140 bits). The two 30-bit primes sit next to the scale, so the two
//!   available rescales keep the scale near Δ; intended for fast unit
//!   tests at multiplicative depth ≤ 2.
//!
//! Ciphertexts always span the whole chain; key-switching works over the
//! chain extended by one 60-bit auxiliary prime whose division absorbs the
//! key-switching noise. The auxiliary prime is key material only and never
//! appears in a ciphertext.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ring::{next_ntt_prime, PrimeContext, RingParams};

/// Parameters of the approximate-arithmetic scheme.
#[derive(Debug)]
pub struct SchemeParams {
    /// Profile name ("mnist-8192", "test-4096" or "custom").
    pub name: String,
    /// Ciphertext modulus chain.
    pub ring: Arc<RingParams>,
    /// Chain plus the auxiliary prime; key material lives here.
    pub key_ring: Arc<RingParams>,
    /// Encoding scale Δ, a power of two.
    pub scale: f64,
    /// Informational security tag; never verified by the library.
    pub security_note: String,
}

impl SchemeParams {
    /// Build a parameter set from a chain bit pattern. Primes are found by
    /// deterministic search, so the same pattern always yields the same
    /// chain.
    pub fn from_bit_pattern(
        name: &str,
        degree: usize,
        chain_bits: &[u32],
        scale_bits: u32,
        security_note: &str,
    ) -> Result<Arc<Self>> {
        if chain_bits.len() < 2 {
            return Err(Error::InvalidParams(
                "modulus chain needs at least 2 primes".into(),
            ));
        }
        let mut primes = Vec::with_capacity(chain_bits.len());
        for &bits in chain_bits {
            // continue each search above the largest prime found so far for
            // this bit size, keeping the chain duplicate-free
            let above = primes
                .iter()
                .copied()
                .filter(|&p: &u64| p >> bits > 0 && p >> (bits + 1) == 0)
                .max()
                .unwrap_or(0);
            primes.push(next_ntt_prime(bits, degree, above));
        }
        let aux = next_ntt_prime(60, degree, 0);
        Self::from_primes(name, degree, &primes, aux, (scale_bits as f64).exp2(), security_note)
    }

    /// Build from explicit prime values (used by wire deserialization).
    pub fn from_primes(
        name: &str,
        degree: usize,
        chain: &[u64],
        aux: u64,
        scale: f64,
        security_note: &str,
    ) -> Result<Arc<Self>> {
        let ring = RingParams::new(degree, chain)?;
        if chain.contains(&aux) {
            return Err(Error::InvalidParams(
                "auxiliary prime collides with the chain".into(),
            ));
        }
        // share NTT tables between the two rings
        let mut key_primes: Vec<Arc<PrimeContext>> = ring.primes.clone();
        let aux_ring = RingParams::new(degree, &[aux])?;
        key_primes.push(aux_ring.primes[0].clone());
        let key_ring = RingParams::from_contexts(degree, key_primes);

        if scale <= 0.0 || scale.log2().fract() != 0.0 {
            return Err(Error::InvalidParams(format!(
                "scale {scale} must be a positive power of two"
            )));
        }
        let min_mid = chain[1..].iter().copied().min().unwrap();
        if scale >= min_mid as f64 {
            return Err(Error::InvalidParams(format!(
                "scale {scale:e} must stay below the smallest mid-chain prime {min_mid}"
            )));
        }
        Ok(Arc::new(SchemeParams {
            name: name.to_string(),
            ring,
            key_ring,
            scale,
            security_note: security_note.to_string(),
        }))
    }

    /// The MNIST inference profile: N = 8192, 206-bit chain, Δ = 2^21.
    pub fn mnist_8192() -> Arc<Self> {
        Self::from_bit_pattern(
            "mnist-8192",
            8192,
            &[31, 25, 25, 25, 25, 25, 25, 25],
            21,
            "128-bit (claimed for this parameter size; not verified here)",
        )
        .expect("preset must validate")
    }

    /// The fast unit-test profile: N = 4096, 140-bit chain, Δ = 2^30.
    pub fn test_4096() -> Arc<Self> {
        Self::from_bit_pattern(
            "test-4096",
            4096,
            &[40, 40, 30, 30],
            30,
            "test profile, no security claim",
        )
        .expect("preset must validate")
    }

    /// Look a profile up by name.
    pub fn by_name(name: &str) -> Result<Arc<Self>> {
        match name {
            "mnist-8192" => Ok(Self::mnist_8192()),
            "test-4096" => Ok(Self::test_4096()),
            other => Err(Error::InvalidParams(format!("unknown profile '{other}'"))),
        }
    }

    pub fn degree(&self) -> usize {
        self.ring.degree
    }

    /// Number of packed real values per ciphertext: N / 2.
    pub fn slot_count(&self) -> usize {
        self.ring.degree / 2
    }

    pub fn chain_len(&self) -> usize {
        self.ring.chain_len()
    }

    /// Top level of a fresh ciphertext (chain length - 1).
    pub fn top_level(&self) -> usize {
        self.chain_len() - 1
    }

    pub fn aux_prime(&self) -> &Arc<PrimeContext> {
        self.key_ring.primes.last().unwrap()
    }

    /// Value of the i-th chain prime as f64, for scale bookkeeping.
    pub fn prime_f64(&self, i: usize) -> f64 {
        self.ring.primes[i].p as f64
    }

    /// Structural equality, used when binding deserialized values.
    pub fn compatible(&self, other: &SchemeParams) -> bool {
        self.degree() == other.degree()
            && self.scale == other.scale
            && self.ring.prime_values() == other.ring.prime_values()
            && self.aux_prime().p == other.aux_prime().p
    }
}
