//! BSDC: an ordered container of uniquely named BSDT tensors.
//!
//! Layout (integers little-endian):
//!   magic   4 bytes "BSDC"
//!   version u8      1
//!   count   u32
//!   count x { name_len u16, name (UTF-8), embedded BSDT file }

use super::bsdt::{parse_bsdt, write_bsdt_bytes, BsdtTensor};
use super::FormatError;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"BSDC";
const VERSION: u8 = 1;

/// Insertion-ordered named tensors; names are unique.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    records: Vec<(String, BsdtTensor)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: &str, tensor: BsdtTensor) -> Result<(), FormatError> {
        if name.len() > u16::MAX as usize {
            return Err(FormatError::Invalid(format!("name of {} bytes exceeds u16", name.len())));
        }
        if self.get(name).is_some() {
            return Err(FormatError::DuplicateName(name.to_string()));
        }
        self.records.push((name.to_string(), tensor));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&BsdtTensor> {
        self.records.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn records(&self) -> &[(String, BsdtTensor)] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

pub fn write_bsdc_bytes(checkpoint: &Checkpoint) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(checkpoint.records.len() as u32).to_le_bytes());
    for (name, tensor) in &checkpoint.records {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&write_bsdt_bytes(tensor));
    }
    out
}

pub fn read_bsdc_bytes(bytes: &[u8]) -> Result<Checkpoint, FormatError> {
    if bytes.len() < 9 {
        return Err(FormatError::Truncated("header needs 9 bytes".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(FormatError::BadMagic { expected: "BSDC", got: bytes[..4].to_vec() });
    }
    if bytes[4] != VERSION {
        return Err(FormatError::BadVersion(bytes[4]));
    }
    let count = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let mut pos = 9;
    let mut checkpoint = Checkpoint::new();
    for i in 0..count {
        if bytes.len() < pos + 2 {
            return Err(FormatError::Truncated(format!("record {i} name length")));
        }
        let name_len = u16::from_le_bytes(bytes[pos..pos + 2].try_into().unwrap()) as usize;
        pos += 2;
        if bytes.len() < pos + name_len {
            return Err(FormatError::Truncated(format!("record {i} name")));
        }
        let name = std::str::from_utf8(&bytes[pos..pos + name_len])
            .map_err(|e| FormatError::BadHeader(format!("record {i} name not UTF-8: {e}")))?
            .to_string();
        pos += name_len;
        let (tensor, consumed) = parse_bsdt(&bytes[pos..])?;
        pos += consumed;
        checkpoint.push(&name, tensor)?;
    }
    if pos != bytes.len() {
        return Err(FormatError::TrailingBytes(bytes.len() - pos));
    }
    Ok(checkpoint)
}

pub fn read_bsdc(path: &Path) -> Result<Checkpoint, FormatError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| FormatError::io(path, e))?;
    read_bsdc_bytes(&bytes)
}

pub fn write_bsdc(path: &Path, checkpoint: &Checkpoint) -> Result<(), FormatError> {
    let bytes = write_bsdc_bytes(checkpoint);
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| FormatError::io(path, e))
}
