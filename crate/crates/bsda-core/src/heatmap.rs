//! Boundary heatmaps: per-point Gaussian fields combined with a
//! probabilistic sum, floored, then peak-normalized.

use crate::field::{FieldKind, ScalarField};
use crate::mask::{extract_boundary, BinaryMask};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HeatmapError {
    #[error("sigma must be positive, got {0}")]
    InvalidSigma(f64),
    #[error("floor must be non-negative, got {0}")]
    InvalidFloor(f64),
    #[error("center ({0}, {1}) outside a {2}x{3} grid")]
    CenterOutOfBounds(usize, usize, usize, usize),
    #[error("field {index} is {got:?}, expected {expected:?}")]
    DimMismatch { index: usize, expected: (usize, usize), got: (usize, usize) },
    #[error("cannot combine an empty list of fields")]
    EmptyFieldList,
    #[error("input value {value} outside [0, 1] in field {field} at index {index}")]
    ValueOutOfRange { field: usize, index: usize, value: f64 },
    #[error("heatmap needs at least one foreground pixel")]
    EmptyForeground,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapParams {
    /// Gaussian bandwidth in pixels.
    pub sigma: f64,
    /// Absolute cutoff applied before peak normalization; combined values
    /// strictly below it become exactly 0.
    pub floor: f64,
}

impl Default for HeatmapParams {
    fn default() -> Self {
        Self { sigma: 2.0, floor: 0.001 }
    }
}

impl HeatmapParams {
    pub fn validate(&self) -> Result<(), HeatmapError> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(HeatmapError::InvalidSigma(self.sigma));
        }
        if !(self.floor >= 0.0) || !self.floor.is_finite() {
            return Err(HeatmapError::InvalidFloor(self.floor));
        }
        Ok(())
    }
}

/// Writes `1/(2*pi*sigma^2) * exp(-((r-cr)^2 + (c-cc)^2) / (2*sigma^2))`
/// for every pixel. The exponential separates over rows and columns, which
/// cuts the exp() count from h*w to h+w.
fn gaussian_into(
    height: usize,
    width: usize,
    center: (usize, usize),
    sigma: f64,
    out: &mut [f64],
) {
    let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma);
    let inv2s2 = 1.0 / (2.0 * sigma * sigma);
    let row_factor: Vec<f64> = (0..height)
        .map(|r| {
            let d = r.abs_diff(center.0);
            (-((d * d) as f64) * inv2s2).exp()
        })
        .collect();
    let col_factor: Vec<f64> = (0..width)
        .map(|c| {
            let d = c.abs_diff(center.1);
            (-((d * d) as f64) * inv2s2).exp()
        })
        .collect();
    for r in 0..height {
        let base = norm * row_factor[r];
        for c in 0..width {
            out[r * width + c] = base * col_factor[c];
        }
    }
}

/// Isotropic Gaussian bump centered on a pixel. The peak value is
/// `1/(2*pi*sigma^2)`, so fields with `sigma >= 0.4` stay below 1.
pub fn gaussian_field(
    height: usize,
    width: usize,
    center: (usize, usize),
    sigma: f64,
) -> Result<ScalarField, HeatmapError> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(HeatmapError::InvalidSigma(sigma));
    }
    if center.0 >= height || center.1 >= width {
        return Err(HeatmapError::CenterOutOfBounds(center.0, center.1, height, width));
    }
    let mut values = vec![0.0; height * width];
    gaussian_into(height, width, center, sigma, &mut values);
    Ok(ScalarField::new_unchecked(height, width, values, FieldKind::Other))
}

/// Probabilistic union of per-pixel activations:
/// `1 - prod_k (1 - field_k)`, folded left-to-right in the given order.
/// Inputs must all share dimensions and lie in [0, 1].
pub fn heatsum(fields: &[ScalarField]) -> Result<ScalarField, HeatmapError> {
    let first = fields.first().ok_or(HeatmapError::EmptyFieldList)?;
    let (h, w) = (first.height(), first.width());
    let mut acc = vec![1.0f64; h * w];
    for (fi, field) in fields.iter().enumerate() {
        if (field.height(), field.width()) != (h, w) {
            return Err(HeatmapError::DimMismatch {
                index: fi,
                expected: (h, w),
                got: (field.height(), field.width()),
            });
        }
        for (index, &v) in field.values().iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(HeatmapError::ValueOutOfRange { field: fi, index, value: v });
            }
            acc[index] *= 1.0 - v;
        }
    }
    let values: Vec<f64> = acc.into_iter().map(|a| 1.0 - a).collect();
    Ok(ScalarField::new_unchecked(h, w, values, FieldKind::Other))
}

/// Combined Gaussian heatmap of every boundary pixel, in canonical
/// (row-major) boundary order, floored and scaled so the maximum is
/// exactly 1. If the floor wipes out everything the zero field is returned.
pub fn boundary_heatmap(
    mask: &BinaryMask,
    params: &HeatmapParams,
) -> Result<ScalarField, HeatmapError> {
    params.validate()?;
    if mask.foreground_count() == 0 {
        return Err(HeatmapError::EmptyForeground);
    }
    let peak = 1.0 / (2.0 * std::f64::consts::PI * params.sigma * params.sigma);
    if peak > 1.0 {
        // A single bump would already violate the [0, 1] combination domain.
        return Err(HeatmapError::ValueOutOfRange { field: 0, index: 0, value: peak });
    }

    let boundary = extract_boundary(mask);
    let (h, w) = (mask.height(), mask.width());
    let mut acc = vec![1.0f64; h * w];
    let mut bump = vec![0.0f64; h * w];
    for &(r, c) in boundary.points() {
        gaussian_into(h, w, (r, c), params.sigma, &mut bump);
        for (a, &v) in acc.iter_mut().zip(&bump) {
            *a *= 1.0 - v;
        }
    }
    let mut values: Vec<f64> = acc.into_iter().map(|a| 1.0 - a).collect();
    for v in &mut values {
        if *v < params.floor {
            *v = 0.0;
        }
    }
    let max = values.iter().copied().fold(0.0f64, f64::max);
    if max > 0.0 {
        for v in &mut values {
            *v /= max;
        }
    }
    Ok(ScalarField::new_unchecked(h, w, values, FieldKind::Heatmap))
}
