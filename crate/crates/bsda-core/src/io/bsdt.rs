//! BSDT: a minimal flat tensor file.
//!
//! Layout (all integers little-endian):
//!   magic  4 bytes  "BSDT"
//!   version u8      1
//!   dtype   u8      0 = f32, 1 = f64
//!   ndim    u8
//!   pad     u8      0
//!   dims    ndim x u32
//!   payload prod(dims) elements, row-major

use super::FormatError;
use crate::field::{FieldKind, ScalarField};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"BSDT";
const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum BsdtData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl BsdtData {
    pub fn len(&self) -> usize {
        match self {
            BsdtData::F32(v) => v.len(),
            BsdtData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values widened to f64 regardless of storage type.
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            BsdtData::F32(v) => v.iter().map(|&x| x as f64).collect(),
            BsdtData::F64(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BsdtTensor {
    pub dims: Vec<u32>,
    pub data: BsdtData,
}

impl BsdtTensor {
    pub fn new(dims: Vec<u32>, data: BsdtData) -> Result<Self, FormatError> {
        if dims.len() > u8::MAX as usize {
            return Err(FormatError::Invalid(format!("{} dims exceed u8", dims.len())));
        }
        let count = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d as usize));
        match count {
            Some(c) if c == data.len() => Ok(Self { dims, data }),
            Some(c) => Err(FormatError::Invalid(format!(
                "dims {:?} imply {c} elements, got {}",
                dims,
                data.len()
            ))),
            None => Err(FormatError::Invalid(format!("dims {dims:?} overflow", dims = dims))),
        }
    }

    pub fn from_field(field: &ScalarField) -> Self {
        Self {
            dims: vec![field.height() as u32, field.width() as u32],
            data: BsdtData::F64(field.values().to_vec()),
        }
    }

    /// Reinterprets a rank-2 tensor as a field with the given kind.
    pub fn to_field(&self, kind: FieldKind) -> Result<ScalarField, FormatError> {
        if self.dims.len() != 2 {
            return Err(FormatError::Invalid(format!(
                "expected rank 2, got dims {:?}",
                self.dims
            )));
        }
        ScalarField::new(self.dims[0] as usize, self.dims[1] as usize, self.data.to_f64(), kind)
            .map_err(|e| FormatError::Invalid(e.to_string()))
    }

    pub fn element_count(&self) -> usize {
        self.data.len()
    }
}

pub fn write_bsdt_bytes(tensor: &BsdtTensor) -> Vec<u8> {
    let (dtype, elem_size) = match &tensor.data {
        BsdtData::F32(_) => (0u8, 4),
        BsdtData::F64(_) => (1u8, 8),
    };
    let mut out =
        Vec::with_capacity(8 + 4 * tensor.dims.len() + elem_size * tensor.element_count());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(dtype);
    out.push(tensor.dims.len() as u8);
    out.push(0);
    for &d in &tensor.dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    match &tensor.data {
        BsdtData::F32(v) => {
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        BsdtData::F64(v) => {
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    out
}

/// Parses one tensor starting at the front of `bytes`, returning it and the
/// number of bytes consumed (for embedding in container formats).
pub(crate) fn parse_bsdt(bytes: &[u8]) -> Result<(BsdtTensor, usize), FormatError> {
    if bytes.len() < 8 {
        return Err(FormatError::Truncated("header needs 8 bytes".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(FormatError::BadMagic { expected: "BSDT", got: bytes[..4].to_vec() });
    }
    if bytes[4] != VERSION {
        return Err(FormatError::BadVersion(bytes[4]));
    }
    let dtype = bytes[5];
    let ndim = bytes[6] as usize;
    if bytes[7] != 0 {
        return Err(FormatError::BadHeader(format!("pad byte is {}, must be 0", bytes[7])));
    }
    let dims_end = 8 + 4 * ndim;
    if bytes.len() < dims_end {
        return Err(FormatError::Truncated(format!("{ndim} dims need {dims_end} bytes")));
    }
    let dims: Vec<u32> = (0..ndim)
        .map(|i| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap()))
        .collect();
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
        .ok_or_else(|| FormatError::BadHeader(format!("dims {dims:?} overflow")))?;
    let elem_size = match dtype {
        0 => 4,
        1 => 8,
        other => return Err(FormatError::BadHeader(format!("unknown dtype {other}"))),
    };
    let payload_end = dims_end
        + count
            .checked_mul(elem_size)
            .ok_or_else(|| FormatError::BadHeader("payload size overflow".into()))?;
    if bytes.len() < payload_end {
        return Err(FormatError::Truncated(format!(
            "payload needs {payload_end} bytes, have {}",
            bytes.len()
        )));
    }
    let payload = &bytes[dims_end..payload_end];
    let data = match dtype {
        0 => BsdtData::F32(
            payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
        _ => BsdtData::F64(
            payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
    };
    Ok((BsdtTensor { dims, data }, payload_end))
}

pub fn read_bsdt_bytes(bytes: &[u8]) -> Result<BsdtTensor, FormatError> {
    let (tensor, consumed) = parse_bsdt(bytes)?;
    if consumed != bytes.len() {
        return Err(FormatError::TrailingBytes(bytes.len() - consumed));
    }
    Ok(tensor)
}

pub fn read_bsdt(path: &Path) -> Result<BsdtTensor, FormatError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| FormatError::io(path, e))?;
    read_bsdt_bytes(&bytes)
}

pub fn write_bsdt(path: &Path, tensor: &BsdtTensor) -> Result<(), FormatError> {
    let bytes = write_bsdt_bytes(tensor);
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| FormatError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_exact() {
        let t = BsdtTensor::new(vec![2, 3], BsdtData::F64(vec![0.0; 6])).unwrap();
        let bytes = write_bsdt_bytes(&t);
        assert_eq!(&bytes[..4], b"BSDT");
        assert_eq!(bytes[4], 1); // version
        assert_eq!(bytes[5], 1); // f64
        assert_eq!(bytes[6], 2); // ndim
        assert_eq!(bytes[7], 0); // pad
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &3u32.to_le_bytes());
        assert_eq!(bytes.len(), 16 + 6 * 8);
    }

    #[test]
    fn both_dtypes_round_trip() {
        let f64s = BsdtTensor::new(
            vec![4],
            BsdtData::F64(vec![-1.5, 0.0, f64::MIN_POSITIVE, 3.25e300]),
        )
        .unwrap();
        let back = read_bsdt_bytes(&write_bsdt_bytes(&f64s)).unwrap();
        assert_eq!(back, f64s);

        let f32s = BsdtTensor::new(vec![2, 2], BsdtData::F32(vec![1.0, -2.5, 3.5, 0.125])).unwrap();
        let bytes = write_bsdt_bytes(&f32s);
        assert_eq!(bytes[5], 0);
        assert_eq!(read_bsdt_bytes(&bytes).unwrap(), f32s);
        assert_eq!(write_bsdt_bytes(&read_bsdt_bytes(&bytes).unwrap()), bytes);
    }

    #[test]
    fn scalar_rank_zero_tensor() {
        let t = BsdtTensor::new(vec![], BsdtData::F64(vec![42.0])).unwrap();
        let back = read_bsdt_bytes(&write_bsdt_bytes(&t)).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn shape_payload_agreement_is_validated() {
        assert!(BsdtTensor::new(vec![2, 2], BsdtData::F64(vec![0.0; 3])).is_err());
        assert!(BsdtTensor::new(vec![u32::MAX, u32::MAX, u32::MAX], BsdtData::F64(vec![])).is_err());
    }

    #[test]
    fn malformed_bytes_are_rejected() {
        let good = write_bsdt_bytes(
            &BsdtTensor::new(vec![2], BsdtData::F64(vec![1.0, 2.0])).unwrap(),
        );
        assert!(matches!(
            read_bsdt_bytes(&good[..good.len() - 1]),
            Err(FormatError::Truncated(_))
        ));
        let mut trailing = good.clone();
        trailing.push(0);
        assert!(matches!(read_bsdt_bytes(&trailing), Err(FormatError::TrailingBytes(1))));
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(read_bsdt_bytes(&bad_magic), Err(FormatError::BadMagic { .. })));
        let mut bad_version = good.clone();
        bad_version[4] = 9;
        assert!(matches!(read_bsdt_bytes(&bad_version), Err(FormatError::BadVersion(9))));
        let mut bad_dtype = good.clone();
        bad_dtype[5] = 7;
        assert!(matches!(read_bsdt_bytes(&bad_dtype), Err(FormatError::BadHeader(_))));
        let mut bad_pad = good;
        bad_pad[7] = 1;
        assert!(matches!(read_bsdt_bytes(&bad_pad), Err(FormatError::BadHeader(_))));
    }

    #[test]
    fn field_conversion_preserves_bits() {
        use crate::field::{FieldKind, ScalarField};
        let field =
            ScalarField::new(2, 2, vec![-1.0, -0.25, 0.0, 1.0], FieldKind::NormalizedSdm).unwrap();
        let tensor = BsdtTensor::from_field(&field);
        let back = tensor.to_field(FieldKind::NormalizedSdm).unwrap();
        assert_eq!(back.values(), field.values());
        // +0.0 survives (sign bit preserved end to end).
        assert!(back.values()[2].is_sign_positive());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn random_f64_tensors_round_trip_bitwise(
                values in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 0..64),
            ) {
                let t = BsdtTensor::new(vec![values.len() as u32], BsdtData::F64(values)).unwrap();
                let bytes = write_bsdt_bytes(&t);
                let back = read_bsdt_bytes(&bytes).unwrap();
                prop_assert_eq!(write_bsdt_bytes(&back), bytes);
            }
        }
    }
}
