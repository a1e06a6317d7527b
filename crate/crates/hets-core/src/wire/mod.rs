//! Bit-exact binary serialization for public contexts, ciphertexts and
//! encrypted vectors, plus the request/response inference service and
//! client.

mod codec;
mod frame;
mod service;

pub use codec::{
    deserialize_ciphertext, deserialize_context, deserialize_encrypted_vector,
    serialize_ciphertext, serialize_context, serialize_encrypted_vector,
};
pub use frame::{decode_frame, encode_frame, read_frame, write_frame, FrameKind, MAGIC, VERSION};
pub use service::{
    client_infer, parse_error_payload, serve_inference, InferReport, ServiceHandle,
};
