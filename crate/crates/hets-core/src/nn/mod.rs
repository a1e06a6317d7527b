//! Layer and model abstractions evaluable in plain and encrypted form,
//! plus the MNIST-shaped fixture pipeline.

pub mod fixtures;
mod forward;
mod model;

pub use forward::{
    hot_rotation_steps,
    encrypted_forward, encrypted_forward_traced, plain_forward, prepare_input, StageRecord,
};
pub use model::{load_model, save_model, ConvGeometry, Layer, Model, MODEL_FORMAT_VERSION};
