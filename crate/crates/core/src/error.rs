//! Engine-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed container: {0}")]
    MalformedContainer(String),

    #[error("malformed box at offset {offset}: {reason}")]
    MalformedBox { offset: usize, reason: String },

    #[error("invalid box tree: {0}")]
    InvalidTree(String),

    #[error("manifest parse: {0}")]
    ManifestParse(String),

    #[error("malformed metadata: {0}")]
    MalformedMetadata(String),

    #[error("unsupported signature algorithm: {0}")]
    UnsupportedAlgorithm(String),

    #[error("byte range {offset}+{length} lies outside file of {file_len} bytes")]
    RangeOutOfBounds {
        offset: u64,
        length: u64,
        file_len: u64,
    },

    #[error("unreadable input: {0}")]
    UnreadableInput(String),

    #[error("unsupported image format")]
    UnsupportedFormat,

    #[error("cbor: {0}")]
    Cbor(String),

    #[error("signing: {0}")]
    Signing(String),

    #[error("trust store: {0}")]
    TrustStore(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
