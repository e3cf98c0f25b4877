//! Dense 2-D scalar fields with a value-range contract per kind.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("field dimensions must be at least 1x1, got {height}x{width}")]
    EmptyDims { height: usize, width: usize },
    #[error("value count {got} does not match {height}x{width}")]
    CountMismatch { height: usize, width: usize, got: usize },
    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("value {value} at index {index} outside {lo}..={hi} required for {kind:?}")]
    OutOfRange { index: usize, value: f64, lo: f64, hi: f64, kind: FieldKind },
}

/// What the values mean, and therefore which range they must live in.
/// All kinds require finite values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// Signed distances in pixels, unbounded.
    RawSdm,
    /// Signed distances scaled into [-1, 1].
    NormalizedSdm,
    /// Composed boundary heatmap in [0, 1].
    Heatmap,
    /// Generic per-pixel probability in [0, 1].
    Probability,
    /// No range contract beyond finiteness.
    Other,
}

impl FieldKind {
    fn range(self) -> Option<(f64, f64)> {
        match self {
            FieldKind::NormalizedSdm => Some((-1.0, 1.0)),
            FieldKind::Heatmap | FieldKind::Probability => Some((0.0, 1.0)),
            FieldKind::RawSdm | FieldKind::Other => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    height: usize,
    width: usize,
    values: Vec<f64>,
    kind: FieldKind,
}

impl ScalarField {
    pub fn new(
        height: usize,
        width: usize,
        values: Vec<f64>,
        kind: FieldKind,
    ) -> Result<Self, FieldError> {
        if height == 0 || width == 0 {
            return Err(FieldError::EmptyDims { height, width });
        }
        if values.len() != height * width {
            return Err(FieldError::CountMismatch { height, width, got: values.len() });
        }
        for (index, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(FieldError::NonFinite { index, value });
            }
            if let Some((lo, hi)) = kind.range() {
                if value < lo || value > hi {
                    return Err(FieldError::OutOfRange { index, value, lo, hi, kind });
                }
            }
        }
        Ok(Self { height, width, values, kind })
    }

    /// Constructor for values already proven to satisfy the kind's contract.
    pub(crate) fn new_unchecked(
        height: usize,
        width: usize,
        values: Vec<f64>,
        kind: FieldKind,
    ) -> Self {
        debug_assert!(
            Self::new(height, width, values.clone(), kind).is_ok(),
            "new_unchecked caller violated the field contract"
        );
        Self { height, width, values, kind }
    }

    pub fn zeros(height: usize, width: usize, kind: FieldKind) -> Result<Self, FieldError> {
        Self::new(height, width, vec![0.0; height * width], kind)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.height && col < self.width);
        self.values[row * self.width + col]
    }

    /// Re-tags the field, revalidating against the new kind's range.
    pub fn with_kind(self, kind: FieldKind) -> Result<Self, FieldError> {
        Self::new(self.height, self.width, self.values, kind)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_ranges_are_enforced() {
        assert!(ScalarField::new(1, 2, vec![-1.0, 1.0], FieldKind::NormalizedSdm).is_ok());
        let err = ScalarField::new(1, 2, vec![-1.1, 0.0], FieldKind::NormalizedSdm).unwrap_err();
        assert!(matches!(err, FieldError::OutOfRange { index: 0, .. }));
        let err = ScalarField::new(1, 1, vec![1.5], FieldKind::Heatmap).unwrap_err();
        assert!(matches!(err, FieldError::OutOfRange { .. }));
        // Raw SDMs are unbounded but must be finite.
        assert!(ScalarField::new(1, 1, vec![1e12], FieldKind::RawSdm).is_ok());
        let err = ScalarField::new(1, 1, vec![f64::NAN], FieldKind::Other).unwrap_err();
        assert!(matches!(err, FieldError::NonFinite { index: 0, .. }));
    }

    #[test]
    fn shape_validation() {
        assert!(matches!(
            ScalarField::new(0, 3, vec![], FieldKind::Other),
            Err(FieldError::EmptyDims { .. })
        ));
        assert!(matches!(
            ScalarField::new(2, 2, vec![0.0; 5], FieldKind::Other),
            Err(FieldError::CountMismatch { got: 5, .. })
        ));
    }

    #[test]
    fn retagging_revalidates() {
        let f = ScalarField::new(1, 2, vec![0.25, 2.0], FieldKind::Other).unwrap();
        assert!(f.clone().with_kind(FieldKind::Probability).is_err());
        let g = ScalarField::new(1, 2, vec![0.25, 1.0], FieldKind::Other).unwrap();
        assert_eq!(g.with_kind(FieldKind::Probability).unwrap().kind(), FieldKind::Probability);
    }
}
