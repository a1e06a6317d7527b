//! Error taxonomy shared by every layer of the stack.
//!
//! The mock backend re-raises exactly these variants so that differential
//! tests can compare error traces, not just values.

use thiserror::Error;

/// All failure modes of the library, one variant per contract violation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An NTT was requested in a direction that does not match the
    /// polynomial's current domain.
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    /// Two ring elements with different degree, prime chain or domain
    /// were combined.
    #[error("parameter mismatch: {0}")]
    ParamMismatch(String),

    /// The modulus chain has no prime left to drop; the leveled
    /// multiplication budget is spent.
    #[error("level exhausted: {0}")]
    LevelExhausted(String),

    /// Operands sit at different levels of the modulus chain.
    #[error("level mismatch: left level {left}, right level {right}")]
    LevelMismatch { left: usize, right: usize },

    /// Operand scales differ by more than the 2^-30 relative tolerance.
    #[error("scale mismatch: left scale {left:e}, right scale {right:e}")]
    ScaleMismatch { left: f64, right: f64 },

    /// A multiplication would push the scale past the active modulus.
    #[error("scale overflow: scale {scale:e} exceeds modulus budget at level {level}")]
    ScaleOverflow { scale: f64, level: usize },

    /// Rotation requested for a step with no Galois key and no power-of-two
    /// decomposition available.
    #[error("missing Galois key for rotation step {0}")]
    MissingGaloisKey(i64),

    /// A keyed operation was attempted on a context lacking that key.
    #[error("missing key: {0}")]
    MissingKey(String),

    /// Rotation step outside the valid range at key generation.
    #[error("invalid rotation step {0}")]
    InvalidRotationStep(i64),

    /// Parameter validation failed at context creation.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Worker pool size must be at least 1.
    #[error("invalid worker count {0}")]
    InvalidWorkerCount(usize),

    /// More values than slots.
    #[error("too many values: {got} values for {slots} slots")]
    TooManyValues { got: usize, slots: usize },

    /// Vector longer than the slot count.
    #[error("vector too long: {got} elements for {slots} slots")]
    TooLong { got: usize, slots: usize },

    /// Operands belong to different backend instances.
    #[error("backend mismatch: operands come from different backend instances")]
    BackendMismatch,

    /// Tensor shapes do not compose.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Layer shape validation failure, with the offending layer index.
    #[error("shape error at layer {layer}: {reason}")]
    ShapeError { layer: usize, reason: String },

    /// Encrypted-vector layout does not fit the requested operation.
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    /// Power with exponent zero is not defined for the depth ladder.
    #[error("zero exponent")]
    ZeroExponent,

    /// Polynomial evaluation with an empty coefficient list.
    #[error("empty coefficient list")]
    EmptyCoeffs,

    /// Left-rotation margin of a replicated vector is spent.
    #[error("replication exhausted: {0}")]
    ReplicationExhausted(String),

    /// Wire frame does not start with the HETS magic.
    #[error("bad magic: {0:02x?}")]
    BadMagic([u8; 4]),

    /// Wire frame payload checksum failure.
    #[error("bad checksum: stored {stored:08x}, computed {computed:08x}")]
    BadChecksum { stored: u32, computed: u32 },

    /// Wire frame version not understood by this build.
    #[error("unsupported version {0}")]
    UnsupportedVersion(u16),

    /// Wire frame or payload shorter than its declared length.
    #[error("truncated input: {0}")]
    Truncated(String),

    /// Malformed file or payload contents.
    #[error("parse error: {0}")]
    ParseError(String),

    /// Socket-level failure.
    #[error("transport error: {0}")]
    Transport(String),

    /// Filesystem failure.
    #[error("io error: {0}")]
    IoError(String),

    /// Benchmark shape exceeds the slot count of the profile.
    #[error("shape too large: {got} elements for {slots} slots")]
    ShapeTooLarge { got: usize, slots: usize },
}

impl Error {
    /// Stable machine-parseable code, used as the CLI error prefix and in
    /// wire-level error frames.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DomainMismatch(_) => "DomainMismatch",
            Error::ParamMismatch(_) => "ParamMismatch",
            Error::LevelExhausted(_) => "LevelExhausted",
            Error::LevelMismatch { .. } => "LevelMismatch",
            Error::ScaleMismatch { .. } => "ScaleMismatch",
            Error::ScaleOverflow { .. } => "ScaleOverflow",
            Error::MissingGaloisKey(_) => "MissingGaloisKey",
            Error::MissingKey(_) => "MissingKey",
            Error::InvalidRotationStep(_) => "InvalidRotationStep",
            Error::InvalidParams(_) => "InvalidParams",
            Error::InvalidWorkerCount(_) => "InvalidWorkerCount",
            Error::TooManyValues { .. } => "TooManyValues",
            Error::TooLong { .. } => "TooLong",
            Error::BackendMismatch => "BackendMismatch",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::ShapeError { .. } => "ShapeError",
            Error::LayoutMismatch(_) => "LayoutMismatch",
            Error::ZeroExponent => "ZeroExponent",
            Error::EmptyCoeffs => "EmptyCoeffs",
            Error::ReplicationExhausted(_) => "ReplicationExhausted",
            Error::BadMagic(_) => "BadMagic",
            Error::BadChecksum { .. } => "BadChecksum",
            Error::UnsupportedVersion(_) => "UnsupportedVersion",
            Error::Truncated(_) => "Truncated",
            Error::ParseError(_) => "ParseError",
            Error::Transport(_) => "Transport",
            Error::IoError(_) => "IoError",
            Error::ShapeTooLarge { .. } => "ShapeTooLarge",
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
