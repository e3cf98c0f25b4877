//! Binary (P5) PGM with 8-bit samples.
//!
//! Reader: accepts any standard header (whitespace and `#` comments between
//! tokens, maxval up to 255). Writer: canonical `P5\n<w> <h>\n255\n` header.
//! Mask convention: 0 background, 255 foreground on write; >= 128 reads
//! back as foreground.

use super::FormatError;
use crate::field::{FieldKind, ScalarField};
use crate::mask::BinaryMask;
use std::io::{Read, Write};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Result<usize, FormatError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(FormatError::BadHeader("expected a decimal number".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|e| FormatError::BadHeader(format!("number too large: {e}")))
    }
}

pub fn read_pgm_bytes(bytes: &[u8]) -> Result<GrayImage, FormatError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(FormatError::BadMagic {
            expected: "P5",
            got: bytes.iter().take(2).copied().collect(),
        });
    }
    let mut tok = Tokens { bytes, pos: 2 };
    let width = tok.number()?;
    let height = tok.number()?;
    let maxval = tok.number()?;
    if width == 0 || height == 0 {
        return Err(FormatError::BadHeader(format!("degenerate size {width}x{height}")));
    }
    if maxval == 0 || maxval > 255 {
        return Err(FormatError::BadHeader(format!("unsupported maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if tok.pos >= bytes.len() || !bytes[tok.pos].is_ascii_whitespace() {
        return Err(FormatError::BadHeader("missing raster separator".into()));
    }
    tok.pos += 1;
    let need = width * height;
    let raster = &bytes[tok.pos..];
    if raster.len() < need {
        return Err(FormatError::Truncated(format!(
            "raster has {} of {need} bytes",
            raster.len()
        )));
    }
    if raster.len() > need {
        return Err(FormatError::TrailingBytes(raster.len() - need));
    }
    Ok(GrayImage { width, height, pixels: raster.to_vec() })
}

pub fn write_pgm_bytes(image: &GrayImage) -> Vec<u8> {
    assert_eq!(image.pixels.len(), image.width * image.height);
    let mut out = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    out.extend_from_slice(&image.pixels);
    out
}

pub fn read_pgm(path: &Path) -> Result<GrayImage, FormatError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| FormatError::io(path, e))?;
    read_pgm_bytes(&bytes)
}

pub fn write_pgm(path: &Path, image: &GrayImage) -> Result<(), FormatError> {
    let bytes = write_pgm_bytes(image);
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| FormatError::io(path, e))
}

pub fn gray_to_mask(image: &GrayImage) -> BinaryMask {
    let cells = image.pixels.iter().map(|&p| p >= 128).collect();
    BinaryMask::new(image.height, image.width, cells).expect("reader guarantees nonzero dims")
}

pub fn mask_to_gray(mask: &BinaryMask) -> GrayImage {
    GrayImage {
        width: mask.width(),
        height: mask.height(),
        pixels: mask.cells().iter().map(|&c| if c { 255 } else { 0 }).collect(),
    }
}

/// Quantizes [0, 1] values to 8 bits, clamping anything outside.
pub fn field_to_gray(field: &ScalarField) -> GrayImage {
    GrayImage {
        width: field.width(),
        height: field.height(),
        pixels: field
            .values()
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect(),
    }
}

pub fn gray_to_field(image: &GrayImage) -> ScalarField {
    let values = image.pixels.iter().map(|&p| p as f64 / 255.0).collect();
    ScalarField::new(image.height, image.width, values, FieldKind::Other)
        .expect("u8/255 is finite")
}
