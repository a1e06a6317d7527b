//! Arithmetic in the negacyclic ring R_q = Z_q[x]/(x^N + 1) with RNS
//! coefficient representation and NTT-based multiplication.

mod prime;
mod poly;

pub use prime::{is_prime_u64, next_ntt_prime, PrimeContext};
pub use poly::{Domain, RingParams, RingPoly, SampleKind, ERROR_SIGMA};
