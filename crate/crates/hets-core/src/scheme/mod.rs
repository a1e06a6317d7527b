//! The leveled approximate-arithmetic encryption scheme: canonical-embedding
//! encoding, key generation, encryption/decryption and the homomorphic
//! primitives (add, multiply + relinearize, rotate, rescale).

mod encoding;
mod eval;
mod keys;
mod params;

pub use encoding::{galois_element, Encoder, Plaintext};
pub use eval::{scales_match, Ciphertext, Evaluator};
pub use keys::{keygen, plan_rotation, GaloisKeys, PublicKey, RelinKey, SecretKey, SwitchKey};
pub(crate) use keys::SwitchKeyDigit;
pub use params::SchemeParams;
