//! Binary masks and their inner boundaries.
//!
//! Conventions used throughout the workspace:
//! - row-major storage, pixel (row, col), integer pixel-center coordinates;
//! - 4-connectivity for boundary extraction;
//! - everything outside the image border counts as background, so foreground
//!   pixels touching the border are boundary pixels.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MaskError {
    #[error("mask dimensions must be at least 1x1, got {height}x{width}")]
    EmptyDims { height: usize, width: usize },
    #[error("cell count {got} does not match {height}x{width}")]
    CellCountMismatch { height: usize, width: usize, got: usize },
}

/// Rectangular binary image. `true` cells are foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    height: usize,
    width: usize,
    cells: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, cells: Vec<bool>) -> Result<Self, MaskError> {
        if height == 0 || width == 0 {
            return Err(MaskError::EmptyDims { height, width });
        }
        if cells.len() != height * width {
            return Err(MaskError::CellCountMismatch { height, width, got: cells.len() });
        }
        Ok(Self { height, width, cells })
    }

    pub fn filled(height: usize, width: usize, value: bool) -> Result<Self, MaskError> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        debug_assert!(row < self.height && col < self.width);
        self.cells[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        debug_assert!(row < self.height && col < self.width);
        self.cells[row * self.width + col] = value;
    }

    pub fn foreground_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// True if the pixel is foreground and at least one 4-neighbor is
    /// background or lies outside the image.
    fn is_boundary(&self, row: usize, col: usize) -> bool {
        if !self.get(row, col) {
            return false;
        }
        (row == 0 || !self.get(row - 1, col))
            || (row + 1 == self.height || !self.get(row + 1, col))
            || (col == 0 || !self.get(row, col - 1))
            || (col + 1 == self.width || !self.get(row, col + 1))
    }
}

/// Inner boundary of a mask: points sorted row-major, no duplicates, and
/// every point is foreground in the mask it was extracted from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundarySet {
    height: usize,
    width: usize,
    points: Vec<(usize, usize)>,
}

impl BoundarySet {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn points(&self) -> &[(usize, usize)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, point: (usize, usize)) -> bool {
        self.points.binary_search(&point).is_ok()
    }

    /// Indicator mask over the same grid, true exactly at boundary points.
    pub fn to_mask(&self) -> BinaryMask {
        let mut mask = BinaryMask::filled(self.height, self.width, false)
            .expect("boundary grid dims come from a valid mask");
        for &(r, c) in &self.points {
            mask.set(r, c, true);
        }
        mask
    }
}

/// Extracts the inner 4-connected boundary. Scanning row-major keeps the
/// point list sorted without an extra pass.
pub fn extract_boundary(mask: &BinaryMask) -> BoundarySet {
    let mut points = Vec::new();
    for r in 0..mask.height() {
        for c in 0..mask.width() {
            if mask.is_boundary(r, c) {
                points.push((r, c));
            }
        }
    }
    BoundarySet { height: mask.height(), width: mask.width(), points }
}

/// Disjoint cover of the grid: interior (foreground, not boundary),
/// boundary, exterior (background). All three lists are sorted row-major.
#[derive(Debug, Clone)]
pub struct Partition {
    pub interior: Vec<(usize, usize)>,
    pub boundary: BoundarySet,
    pub exterior: Vec<(usize, usize)>,
}

pub fn partition(mask: &BinaryMask) -> Partition {
    let boundary = extract_boundary(mask);
    let mut interior = Vec::new();
    let mut exterior = Vec::new();
    for r in 0..mask.height() {
        for c in 0..mask.width() {
            if !mask.get(r, c) {
                exterior.push((r, c));
            } else if !boundary.contains((r, c)) {
                interior.push((r, c));
            }
        }
    }
    Partition { interior, boundary, exterior }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from_str(rows: &[&str]) -> BinaryMask {
        let height = rows.len();
        let width = rows[0].len();
        let cells = rows
            .iter()
            .flat_map(|r| r.chars().map(|c| c == '#'))
            .collect();
        BinaryMask::new(height, width, cells).unwrap()
    }

    #[test]
    fn rejects_zero_dims_and_bad_cell_count() {
        assert_eq!(
            BinaryMask::new(0, 4, vec![]),
            Err(MaskError::EmptyDims { height: 0, width: 4 })
        );
        assert_eq!(
            BinaryMask::new(2, 2, vec![true; 3]),
            Err(MaskError::CellCountMismatch { height: 2, width: 2, got: 3 })
        );
    }

    #[test]
    fn square_in_5x5_has_ring_boundary_and_center_interior() {
        let mask = mask_from_str(&[
            ".....",
            ".###.",
            ".###.",
            ".###.",
            ".....",
        ]);
        let part = partition(&mask);
        let ring: Vec<(usize, usize)> = vec![
            (1, 1), (1, 2), (1, 3),
            (2, 1), (2, 3),
            (3, 1), (3, 2), (3, 3),
        ];
        assert_eq!(part.boundary.points(), ring.as_slice());
        assert_eq!(part.interior, vec![(2, 2)]);
        assert_eq!(part.exterior.len(), 25 - 9);
    }

    #[test]
    fn border_touching_foreground_is_boundary() {
        // The image border counts as background, so the outer ring of a
        // fully foreground mask is boundary; only the center survives as
        // interior and nothing is exterior.
        let mask = BinaryMask::filled(3, 3, true).unwrap();
        let part = partition(&mask);
        assert_eq!(part.boundary.len(), 8);
        assert!(!part.boundary.contains((1, 1)));
        assert_eq!(part.interior, vec![(1, 1)]);
        assert!(part.exterior.is_empty());
    }

    #[test]
    fn single_pixel_is_its_own_boundary() {
        let mut mask = BinaryMask::filled(4, 5, false).unwrap();
        mask.set(2, 3, true);
        let boundary = extract_boundary(&mask);
        assert_eq!(boundary.points(), &[(2, 3)]);
    }

    #[test]
    fn boundary_points_are_sorted_foreground_and_unique() {
        let mask = mask_from_str(&[
            "##..#",
            "###.#",
            ".##..",
            "..###",
        ]);
        let boundary = extract_boundary(&mask);
        for w in boundary.points().windows(2) {
            assert!(w[0] < w[1], "points must be strictly increasing row-major");
        }
        for &(r, c) in boundary.points() {
            assert!(mask.get(r, c), "boundary must be a subset of foreground");
        }
    }

    #[test]
    fn boundary_to_mask_round_trips_points() {
        let mask = mask_from_str(&["..#..", ".###.", "..#.."]);
        let boundary = extract_boundary(&mask);
        let as_mask = boundary.to_mask();
        assert_eq!(as_mask.foreground_count(), boundary.len());
        for &(r, c) in boundary.points() {
            assert!(as_mask.get(r, c));
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_mask() -> impl Strategy<Value = BinaryMask> {
            (1usize..12, 1usize..12).prop_flat_map(|(h, w)| {
                proptest::collection::vec(any::<bool>(), h * w)
                    .prop_map(move |cells| BinaryMask::new(h, w, cells).unwrap())
            })
        }

        proptest! {
            #[test]
            fn partition_is_a_disjoint_cover(mask in arb_mask()) {
                let part = partition(&mask);
                let total = part.interior.len() + part.boundary.len() + part.exterior.len();
                prop_assert_eq!(total, mask.height() * mask.width());
                let mut seen = vec![false; mask.height() * mask.width()];
                let all = part
                    .interior
                    .iter()
                    .chain(part.boundary.points())
                    .chain(part.exterior.iter());
                for &(r, c) in all {
                    let idx = r * mask.width() + c;
                    prop_assert!(!seen[idx], "pixel covered twice");
                    seen[idx] = true;
                }
            }
        }
    }
}
