//! Plain tensors and the encrypted single-ciphertext vector with its
//! operation catalog: element-wise arithmetic, depth-minimal power and
//! polynomial evaluation, the replication-based dot products and the
//! im2col convolution primitives.

mod conv;
mod encrypted;
mod plain;

pub use conv::{conv2d_direct, conv2d_im2col, encrypt_windowed, im2col_encode, Im2col};
pub use encrypted::{
    add, add_plain, decrypt_vector, depth_of_power, dot_plain_matrix, dot_plain_matrix_scaled,
    dot_product, dot_product_plain, encrypt_vector, mul, mul_plain, negate, polyval, power,
    replicate_to_fill, square, sub, sub_plain, EncryptedVector, Layout,
};
pub use plain::PlainTensor;
