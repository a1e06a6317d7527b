//! hets-core: a self-contained leveled homomorphic encryption stack with an
//! encrypted tensor layer.
//!
//! The crate layers up from raw ring arithmetic to an encrypted CNN
//! pipeline:
//!
//! - [`ring`]: negacyclic polynomial arithmetic in RNS form with NTT
//!   multiplication.
//! - [`scheme`]: the approximate-arithmetic RLWE scheme — canonical
//!   embedding, key generation, encryption, homomorphic evaluation.
//! - [`backend`]: a uniform evaluation interface with a real and an exact
//!   mock implementation sharing one error taxonomy.
//! - [`context`]: the central key/configuration object.

pub mod backend;
pub mod context;
pub mod error;
pub mod ring;
pub mod scheme;
pub mod nn;
pub mod tensors;
pub mod wire;

pub use backend::{Backend, BackendKind, BackendVector, MockCiphertext, OpEvent, TraceHandle};
pub use context::Context;
pub use error::{Error, Result};
pub use scheme::{Ciphertext, Plaintext, SchemeParams};
pub use tensors::{EncryptedVector, Layout, PlainTensor};
