//! Local-first image provenance verification engine.

pub mod cbor;
pub mod container;
pub mod error;
pub mod jumbf;
pub mod manifest;
pub mod metadata;
pub mod trust;

pub use error::{Error, Result};
pub mod signer;
pub mod net;
pub mod verdict;
pub mod pipeline;
