//! Dataset manifest and loading.
//!
//! A dataset directory holds `images/<id>.pgm`, `masks/<id>.pgm`, and a
//! `manifest.csv` with header `id,class,split`. Class labels are assigned
//! from the sorted set of distinct class names in the full manifest, so a
//! split-filtered load still sees the same label mapping.

use crate::field::ScalarField;
use crate::io::{gray_to_field, gray_to_mask, read_pgm, FormatError};
use crate::mask::BinaryMask;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("manifest line {line}: {reason}")]
    BadManifest { line: usize, reason: String },
    #[error("no samples matched the requested split")]
    EmptySplit,
    #[error("sample {id}: image is {image_h}x{image_w} but mask is {mask_h}x{mask_w}")]
    ShapeMismatch { id: String, image_h: usize, image_w: usize, mask_h: usize, mask_w: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub class: String,
    pub split: Split,
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<(), FormatError> {
    let mut out = String::from("id,class,split\n");
    for e in entries {
        out.push_str(&format!("{},{},{}\n", e.id, e.class, e.split.as_str()));
    }
    std::fs::write(path, out).map_err(|e| FormatError::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "id,class,split")) => {}
        Some((_, other)) => {
            return Err(DatasetError::BadManifest {
                line: 1,
                reason: format!("expected header 'id,class,split', got '{other}'"),
            })
        }
        None => {
            return Err(DatasetError::BadManifest { line: 1, reason: "empty manifest".into() })
        }
    }
    let mut entries = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let (id, class, split) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(id), Some(class), Some(split), None) => (id, class, split),
            _ => {
                return Err(DatasetError::BadManifest {
                    line: i + 1,
                    reason: "expected exactly three comma-separated fields".into(),
                })
            }
        };
        if id.is_empty() || class.is_empty() {
            return Err(DatasetError::BadManifest {
                line: i + 1,
                reason: "empty id or class".into(),
            });
        }
        let split = Split::parse(split).ok_or_else(|| DatasetError::BadManifest {
            line: i + 1,
            reason: format!("unknown split '{split}'"),
        })?;
        entries.push(ManifestEntry { id: id.to_string(), class: class.to_string(), split });
    }
    Ok(entries)
}

/// Sorted distinct class names; the index of a name is its numeric label.
pub fn class_names(entries: &[ManifestEntry]) -> Vec<String> {
    let mut names: Vec<String> = entries.iter().map(|e| e.class.clone()).collect();
    names.sort();
    names.dedup();
    names
}

#[derive(Debug, Clone)]
pub struct LoadedSample {
    pub id: String,
    pub label: usize,
    pub split: Split,
    pub image: ScalarField,
    pub mask: BinaryMask,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub classes: Vec<String>,
    pub samples: Vec<LoadedSample>,
}

/// Loads samples in manifest order, optionally restricted to one split.
pub fn load_dataset(dir: &Path, split: Option<Split>) -> Result<Dataset, DatasetError> {
    let entries = read_manifest(&dir.join("manifest.csv"))?;
    let classes = class_names(&entries);
    let mut samples = Vec::new();
    for e in &entries {
        if split.is_some_and(|s| s != e.split) {
            continue;
        }
        let image = gray_to_field(&read_pgm(&dir.join("images").join(format!("{}.pgm", e.id)))?);
        let mask = gray_to_mask(&read_pgm(&dir.join("masks").join(format!("{}.pgm", e.id)))?);
        if image.height() != mask.height() || image.width() != mask.width() {
            return Err(DatasetError::ShapeMismatch {
                id: e.id.clone(),
                image_h: image.height(),
                image_w: image.width(),
                mask_h: mask.height(),
                mask_w: mask.width(),
            });
        }
        let label = classes.binary_search(&e.class).expect("class drawn from manifest");
        samples.push(LoadedSample {
            id: e.id.clone(),
            label,
            split: e.split,
            image,
            mask,
        });
    }
    if samples.is_empty() {
        return Err(DatasetError::EmptySplit);
    }
    Ok(Dataset { classes, samples })
}
