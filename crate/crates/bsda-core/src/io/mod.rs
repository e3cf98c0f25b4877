//! Bit-exact file formats: binary PGM images, BSDT tensor files, and BSDC
//! named-tensor containers. Writers emit one canonical byte layout, so
//! write -> read -> write reproduces files byte for byte.

mod bsdc;
mod bsdt;
mod pgm;

pub use bsdc::{read_bsdc, read_bsdc_bytes, write_bsdc, write_bsdc_bytes, Checkpoint};
pub use bsdt::{read_bsdt, read_bsdt_bytes, write_bsdt, write_bsdt_bytes, BsdtData, BsdtTensor};
pub use pgm::{
    gray_to_field, gray_to_mask, field_to_gray, mask_to_gray, read_pgm, write_pgm, GrayImage,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic: expected {expected}, got {got:?}")]
    BadMagic { expected: &'static str, got: Vec<u8> },
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("file ends early: {0}")]
    Truncated(String),
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("duplicate tensor name {0:?}")]
    DuplicateName(String),
    #[error("{0}")]
    Invalid(String),
}

impl FormatError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        FormatError::Io { path: path.display().to_string(), source }
    }
}
