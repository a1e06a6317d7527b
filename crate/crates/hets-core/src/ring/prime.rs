//! Per-prime modular arithmetic and the negacyclic NTT engine.
//!
//! Each prime q satisfies q ≡ 1 (mod 2N), so Z_q contains a primitive
//! 2N-th root of unity ψ and the ring Z_q[x]/(x^N + 1) splits completely.
//! Multiplication of ring elements becomes a pointwise product between
//! forward transforms.
//!
//! Reduction strategy: Barrett reduction with a precomputed 128-bit ratio
//! for variable × variable products, Shoup multiplication for products
//! against precomputed constants (twiddle factors, N^-1).

/// Modular arithmetic context for a single NTT-friendly prime.
#[derive(Debug)]
pub struct PrimeContext {
    /// The prime modulus, odd, < 2^61, ≡ 1 (mod 2N).
    pub p: u64,
    /// ceil(log2(p)): the packed width of a residue on the wire.
    pub bits: u32,
    degree: usize,
    // floor(2^128 / p), split into 64-bit halves.
    ratio_hi: u64,
    ratio_lo: u64,
    // ψ^bitrev(i) and ψ^-bitrev(i) with their Shoup companions.
    psi_brv: Vec<u64>,
    psi_brv_shoup: Vec<u64>,
    ipsi_brv: Vec<u64>,
    ipsi_brv_shoup: Vec<u64>,
    n_inv: u64,
    n_inv_shoup: u64,
}

impl PrimeContext {
    /// Build the context for `p` over degree-`degree` negacyclic polynomials.
    ///
    /// Panics if `p` is not ≡ 1 (mod 2·degree) or no primitive 2N-th root
    /// exists; callers validate primality beforehand.
    pub fn new(p: u64, degree: usize) -> Self {
        assert!(degree.is_power_of_two(), "degree must be a power of two");
        let two_n = 2 * degree as u64;
        assert_eq!(p % two_n, 1, "prime must be 1 mod 2N");
        assert!(p < (1u64 << 61), "prime must be below 2^61");

        let (ratio_hi, ratio_lo) = barrett_ratio(p);
        let psi = find_primitive_2n_root(p, degree);
        let psi_inv = inv_mod(psi, p);
        let log_n = degree.trailing_zeros();

        let mut psi_brv = vec![0u64; degree];
        let mut ipsi_brv = vec![0u64; degree];
        let mut pow = 1u64;
        let mut ipow = 1u64;
        for i in 0..degree {
            let r = bit_reverse(i, log_n);
            psi_brv[r] = pow;
            ipsi_brv[r] = ipow;
            pow = mul_mod_u64(pow, psi, p);
            ipow = mul_mod_u64(ipow, psi_inv, p);
        }
        let psi_brv_shoup = psi_brv.iter().map(|&w| shoup(w, p)).collect();
        let ipsi_brv_shoup = ipsi_brv.iter().map(|&w| shoup(w, p)).collect();

        let n_inv = inv_mod(degree as u64 % p, p);
        let n_inv_shoup = shoup(n_inv, p);

        PrimeContext {
            p,
            bits: 64 - p.leading_zeros(),
            degree,
            ratio_hi,
            ratio_lo,
            psi_brv,
            psi_brv_shoup,
            ipsi_brv,
            ipsi_brv_shoup,
            n_inv,
            n_inv_shoup,
        }
    }

    #[inline(always)]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline(always)]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        let s = a.wrapping_sub(b);
        if a < b {
            s.wrapping_add(self.p)
        } else {
            s
        }
    }

    #[inline(always)]
    pub fn negate(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    /// Barrett reduction of a 128-bit value to [0, p).
    #[inline(always)]
    pub fn reduce128(&self, x: u128) -> u64 {
        let xlo = x as u64;
        let xhi = (x >> 64) as u64;
        let c = (xlo as u128 * self.ratio_lo as u128) >> 64;
        let s = xlo as u128 * self.ratio_hi as u128 + xhi as u128 * self.ratio_lo as u128;
        let q = xhi as u128 * self.ratio_hi as u128 + ((s + c) >> 64);
        let mut r = xlo.wrapping_sub((q as u64).wrapping_mul(self.p));
        while r >= self.p {
            r -= self.p;
        }
        r
    }

    /// Reduce an arbitrary u64 (possibly ≥ p) to [0, p).
    #[inline(always)]
    pub fn reduce64(&self, x: u64) -> u64 {
        if x < self.p {
            x
        } else {
            self.reduce128(x as u128)
        }
    }

    /// Variable × variable product mod p.
    #[inline(always)]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce128(a as u128 * b as u128)
    }

    /// Product against a precomputed constant (w, w_shoup); w must be < p.
    #[inline(always)]
    pub fn mul_shoup(&self, x: u64, w: u64, w_shoup: u64) -> u64 {
        let q = ((x as u128 * w_shoup as u128) >> 64) as u64;
        let r = x.wrapping_mul(w).wrapping_sub(q.wrapping_mul(self.p));
        if r >= self.p {
            r - self.p
        } else {
            r
        }
    }

    /// Shoup companion for a constant that will multiply many residues.
    pub fn shoup_of(&self, w: u64) -> u64 {
        shoup(w, self.p)
    }

    /// Map a signed integer to its residue.
    #[inline]
    pub fn from_i64(&self, v: i64) -> u64 {
        if v >= 0 {
            self.reduce64(v as u64)
        } else {
            let m = self.reduce64(v.unsigned_abs());
            self.negate(m)
        }
    }

    /// Centered representative in (-p/2, p/2]; exact since p is odd.
    #[inline]
    pub fn to_centered(&self, r: u64) -> i64 {
        if r > self.p / 2 {
            -((self.p - r) as i64)
        } else {
            r as i64
        }
    }

    pub fn inv(&self, a: u64) -> u64 {
        inv_mod(a, self.p)
    }

    /// In-place forward negacyclic NTT (Cooley-Tukey, ψ powers merged).
    pub fn ntt_forward(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.degree);
        let n = self.degree;
        let mut t = n;
        let mut m = 1;
        while m < n {
            t >>= 1;
            for i in 0..m {
                let j1 = 2 * i * t;
                let w = self.psi_brv[m + i];
                let ws = self.psi_brv_shoup[m + i];
                for j in j1..j1 + t {
                    let u = a[j];
                    let v = self.mul_shoup(a[j + t], w, ws);
                    a[j] = self.add(u, v);
                    a[j + t] = self.sub(u, v);
                }
            }
            m <<= 1;
        }
    }

    /// In-place inverse negacyclic NTT (Gentleman-Sande), scaled by N^-1.
    pub fn ntt_inverse(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.degree);
        let n = self.degree;
        let mut t = 1;
        let mut m = n;
        while m > 1 {
            let h = m >> 1;
            let mut j1 = 0;
            for i in 0..h {
                let w = self.ipsi_brv[h + i];
                let ws = self.ipsi_brv_shoup[h + i];
                for j in j1..j1 + t {
                    let u = a[j];
                    let v = a[j + t];
                    a[j] = self.add(u, v);
                    a[j + t] = self.mul_shoup(self.sub(u, v), w, ws);
                }
                j1 += 2 * t;
            }
            t <<= 1;
            m = h;
        }
        for x in a.iter_mut() {
            *x = self.mul_shoup(*x, self.n_inv, self.n_inv_shoup);
        }
    }
}

fn barrett_ratio(p: u64) -> (u64, u64) {
    // floor(2^128 / p) = floor((u128::MAX + 1) / p)
    let q = u128::MAX / p as u128;
    let r = u128::MAX % p as u128;
    let ratio = if r + 1 == p as u128 { q + 1 } else { q };
    ((ratio >> 64) as u64, ratio as u64)
}

fn shoup(w: u64, p: u64) -> u64 {
    (((w as u128) << 64) / p as u128) as u64
}

#[inline]
fn bit_reverse(x: usize, bits: u32) -> usize {
    x.reverse_bits() >> (usize::BITS - bits)
}

pub(crate) fn mul_mod_u64(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

pub(crate) fn pow_mod(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod_u64(acc, base, p);
        }
        base = mul_mod_u64(base, base, p);
        exp >>= 1;
    }
    acc
}

pub(crate) fn inv_mod(a: u64, p: u64) -> u64 {
    assert!(a % p != 0, "zero has no inverse");
    pow_mod(a, p - 2, p)
}

fn find_primitive_2n_root(p: u64, degree: usize) -> u64 {
    let two_n = 2 * degree as u64;
    let cofactor = (p - 1) / two_n;
    for g in 2..1024u64 {
        let cand = pow_mod(g, cofactor, p);
        // ψ is a primitive 2N-th root iff ψ^N = -1.
        if pow_mod(cand, degree as u64, p) == p - 1 {
            return cand;
        }
    }
    panic!("no primitive 2N-th root found for p={p}");
}

/// Deterministic Miller-Rabin, valid for all u64.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &q in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == q {
            return true;
        }
        if n % q == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..s - 1 {
            x = mul_mod_u64(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Smallest NTT-friendly prime of at least `bits` bits strictly above
/// `above` (pass 0 for the first one). Deterministic, so parameter sets
/// are reproducible across builds.
pub fn next_ntt_prime(bits: u32, degree: usize, above: u64) -> u64 {
    let two_n = 2 * degree as u64;
    assert!(bits >= 2 + two_n.trailing_zeros(), "prime size too small for 2N");
    assert!(bits < 62, "prime size must stay below 2^61");
    let floor = 1u64 << bits;
    let mut cand = floor.max(above) + 1;
    // Align to ≡ 1 (mod 2N).
    let rem = (cand - 1) % two_n;
    if rem != 0 {
        cand += two_n - rem;
    }
    while !is_prime_u64(cand) {
        cand += two_n;
    }
    cand
}
