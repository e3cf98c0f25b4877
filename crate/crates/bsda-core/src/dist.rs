//! Exact Euclidean distance transform and signed distance maps.
//!
//! The transform is the separable lower-envelope method: each column (then
//! each row) of squared distances is the pointwise minimum of parabolas
//! `(p - q)^2 + f(q)`, computed in one sweep per line, O(height * width)
//! parabola operations overall. Squared distances stay exact integers in
//! f64, so results are bit-stable and match the brute-force oracle exactly.

use crate::field::{FieldKind, ScalarField};
use crate::mask::{extract_boundary, partition, BinaryMask};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DistError {
    #[error("distance transform needs at least one feature pixel")]
    EmptyFeatureSet,
    #[error("signed distance map needs at least one foreground pixel")]
    EmptyForeground,
}

/// Stand-in for "no feature in this line yet". Large enough to lose against
/// any real squared distance, small enough to keep the envelope arithmetic
/// finite.
const ABSENT: f64 = 1e20;

/// 1-D squared-distance transform of `f`, written into `d`.
/// `v` and `z` are scratch for parabola vertices and envelope breakpoints.
fn envelope_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let mut s;
        loop {
            let vk = v[k];
            s = ((f[q] + (q * q) as f64) - (f[vk] + (vk * vk) as f64))
                / (2 * (q - vk)) as f64;
            if s <= z[k] {
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let vk = v[k];
        let dq = q.abs_diff(vk);
        d[q] = (dq * dq) as f64 + f[vk];
    }
}

struct Scratch {
    f: Vec<f64>,
    d: Vec<f64>,
    v: Vec<usize>,
    z: Vec<f64>,
}

fn pass_cols(grid: &mut [f64], h: usize, w: usize, s: &mut Scratch) {
    for c in 0..w {
        for r in 0..h {
            s.f[r] = grid[r * w + c];
        }
        envelope_1d(&s.f[..h], &mut s.d[..h], &mut s.v, &mut s.z);
        for r in 0..h {
            grid[r * w + c] = s.d[r];
        }
    }
}

fn pass_rows(grid: &mut [f64], h: usize, w: usize, s: &mut Scratch) {
    for r in 0..h {
        s.f[..w].copy_from_slice(&grid[r * w..(r + 1) * w]);
        envelope_1d(&s.f[..w], &mut s.d[..w], &mut s.v, &mut s.z);
        grid[r * w..(r + 1) * w].copy_from_slice(&s.d[..w]);
    }
}

/// Squared distance from every pixel to the nearest `true` cell. Both pass
/// orders give bitwise identical results: each 1D envelope over exact
/// integer squared distances is itself exact, so no rounding accumulates.
pub fn edt_sq(feature: &BinaryMask, column_first: bool) -> Vec<f64> {
    let (h, w) = (feature.height(), feature.width());
    let mut grid: Vec<f64> = feature
        .cells()
        .iter()
        .map(|&on| if on { 0.0 } else { ABSENT })
        .collect();

    let longest = h.max(w);
    let mut s = Scratch {
        f: vec![0.0; longest],
        d: vec![0.0; longest],
        v: vec![0usize; longest],
        z: vec![0.0; longest + 1],
    };

    if column_first {
        pass_cols(&mut grid, h, w, &mut s);
        pass_rows(&mut grid, h, w, &mut s);
    } else {
        pass_rows(&mut grid, h, w, &mut s);
        pass_cols(&mut grid, h, w, &mut s);
    }
    grid
}

/// Exact Euclidean distance (in pixels) from every pixel to the nearest
/// `true` cell of `feature`.
pub fn edt(feature: &BinaryMask) -> Result<ScalarField, DistError> {
    if feature.foreground_count() == 0 {
        return Err(DistError::EmptyFeatureSet);
    }
    let sq = edt_sq(feature, true);
    let values: Vec<f64> = sq.into_iter().map(f64::sqrt).collect();
    Ok(ScalarField::new_unchecked(
        feature.height(),
        feature.width(),
        values,
        FieldKind::Other,
    ))
}

/// Signed distance to the mask's inner boundary: negative inside, exactly
/// zero on the boundary, positive outside. Masks without interior pixels
/// yield a one-sided (non-negative) map, which is still valid.
pub fn compute_sdm(mask: &BinaryMask) -> Result<ScalarField, DistError> {
    if mask.foreground_count() == 0 {
        return Err(DistError::EmptyForeground);
    }
    let boundary = extract_boundary(mask);
    let dist = edt(&boundary.to_mask()).expect("nonempty foreground has a boundary");
    let w = mask.width();
    let mut values = dist.values().to_vec();
    for r in 0..mask.height() {
        for c in 0..w {
            let idx = r * w + c;
            if boundary.contains((r, c)) {
                // Keep the +0.0 bit pattern; negating would store -0.0.
                values[idx] = 0.0;
            } else if mask.get(r, c) {
                values[idx] = -values[idx];
            }
        }
    }
    Ok(ScalarField::new_unchecked(mask.height(), w, values, FieldKind::RawSdm))
}

/// Scales each sign class by its own maximum magnitude, so the result spans
/// [-1, 0] inside and [0, 1] outside whenever both classes are present.
/// Zeros are untouched; an empty sign class is left unchanged. Applying the
/// map twice equals applying it once.
pub fn normalize_sdm(field: &ScalarField) -> ScalarField {
    let mut max_neg = 0.0f64;
    let mut max_pos = 0.0f64;
    for &v in field.values() {
        if v < 0.0 {
            max_neg = max_neg.max(-v);
        } else if v > 0.0 {
            max_pos = max_pos.max(v);
        }
    }
    let values: Vec<f64> = field
        .values()
        .iter()
        .map(|&v| {
            if v < 0.0 {
                v / max_neg
            } else if v > 0.0 {
                v / max_pos
            } else {
                v
            }
        })
        .collect();
    ScalarField::new_unchecked(field.height(), field.width(), values, FieldKind::NormalizedSdm)
}

/// Reference implementation: per-pixel minimum over all boundary points,
/// O(pixels * boundary points). Oracle for `compute_sdm`.
pub fn brute_force_sdm(mask: &BinaryMask) -> Result<ScalarField, DistError> {
    if mask.foreground_count() == 0 {
        return Err(DistError::EmptyForeground);
    }
    let part = partition(mask);
    let pts = part.boundary.points();
    let (h, w) = (mask.height(), mask.width());
    let mut values = vec![0.0f64; h * w];
    for r in 0..h {
        for c in 0..w {
            let mut best = f64::INFINITY;
            for &(br, bc) in pts {
                let dr = r.abs_diff(br);
                let dc = c.abs_diff(bc);
                let sq = (dr * dr + dc * dc) as f64;
                if sq < best {
                    best = sq;
                }
            }
            let d = best.sqrt();
            values[r * w + c] = if part.boundary.contains((r, c)) {
                0.0
            } else if mask.get(r, c) {
                -d
            } else {
                d
            };
        }
    }
    Ok(ScalarField::new_unchecked(h, w, values, FieldKind::RawSdm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize, p: f64) -> BinaryMask {
        let cells = (0..h * w).map(|_| rng.random_bool(p)).collect();
        BinaryMask::new(h, w, cells).unwrap()
    }

    #[test]
    fn edt_of_a_1d_strip() {
        let mask = BinaryMask::new(1, 4, vec![false, true, true, false]).unwrap();
        let d = edt(&mask).unwrap();
        assert_eq!(d.values(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn edt_corner_feature_gives_diagonal_distances() {
        let mut mask = BinaryMask::filled(3, 3, false).unwrap();
        mask.set(0, 0, true);
        let d = edt(&mask).unwrap();
        assert_eq!(d.get(2, 2), 8.0f64.sqrt());
        assert_eq!(d.get(0, 2), 2.0);
        assert_eq!(d.get(1, 1), 2.0f64.sqrt());
    }

    #[test]
    fn edt_rejects_empty_feature_set() {
        let mask = BinaryMask::filled(4, 4, false).unwrap();
        assert_eq!(edt(&mask).unwrap_err(), DistError::EmptyFeatureSet);
    }

    #[test]
    fn edt_matches_direct_minimum_on_random_grids() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            let h = rng.random_range(1..20);
            let w = rng.random_range(1..20);
            let mask = random_mask(&mut rng, h, w, 0.2);
            if mask.foreground_count() == 0 {
                continue;
            }
            let d = edt(&mask).unwrap();
            let features: Vec<(usize, usize)> = (0..h)
                .flat_map(|r| (0..w).map(move |c| (r, c)))
                .filter(|&(r, c)| mask.get(r, c))
                .collect();
            for r in 0..h {
                for c in 0..w {
                    let best = features
                        .iter()
                        .map(|&(fr, fc)| {
                            let dr = r.abs_diff(fr);
                            let dc = c.abs_diff(fc);
                            ((dr * dr + dc * dc) as f64).sqrt()
                        })
                        .fold(f64::INFINITY, f64::min);
                    assert_eq!(d.get(r, c), best, "mismatch at ({r},{c})");
                }
            }
        }
    }

    #[test]
    fn pass_order_does_not_change_the_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let h = rng.random_range(1..24);
            let w = rng.random_range(1..24);
            let mask = random_mask(&mut rng, h, w, 0.15);
            if mask.foreground_count() == 0 {
                continue;
            }
            assert_eq!(edt_sq(&mask, true), edt_sq(&mask, false));
        }
    }

    #[test]
    fn sdm_of_square_in_5x5() {
        let mut mask = BinaryMask::filled(5, 5, false).unwrap();
        for r in 1..4 {
            for c in 1..4 {
                mask.set(r, c, true);
            }
        }
        let sdm = compute_sdm(&mask).unwrap();
        assert_eq!(sdm.kind(), FieldKind::RawSdm);
        assert_eq!(sdm.get(2, 2), -1.0);
        assert_eq!(sdm.get(1, 1), 0.0);
        assert_eq!(sdm.get(0, 0), 2.0f64.sqrt());
        assert_eq!(sdm.get(0, 2), 1.0);

        let norm = normalize_sdm(&sdm);
        assert_eq!(norm.kind(), FieldKind::NormalizedSdm);
        assert_eq!(norm.get(2, 2), -1.0);
        assert_eq!(norm.get(0, 0), 1.0);
        assert_eq!(norm.get(1, 1), 0.0);
        assert!(norm.get(1, 1).is_sign_positive(), "boundary keeps +0.0");
    }

    #[test]
    fn single_pixel_mask_is_one_sided() {
        let mut mask = BinaryMask::filled(3, 3, false).unwrap();
        mask.set(1, 1, true);
        let sdm = compute_sdm(&mask).unwrap();
        assert_eq!(sdm.get(1, 1), 0.0);
        assert_eq!(sdm.get(1, 0), 1.0);
        assert_eq!(sdm.get(0, 0), 2.0f64.sqrt());
        assert!(sdm.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn sdm_rejects_empty_foreground() {
        let mask = BinaryMask::filled(3, 3, false).unwrap();
        assert_eq!(compute_sdm(&mask).unwrap_err(), DistError::EmptyForeground);
        assert_eq!(brute_force_sdm(&mask).unwrap_err(), DistError::EmptyForeground);
    }

    #[test]
    fn fast_sdm_matches_brute_force_on_random_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..25 {
            let h = rng.random_range(2..24);
            let w = rng.random_range(2..24);
            let mask = random_mask(&mut rng, h, w, 0.35);
            if mask.foreground_count() == 0 {
                continue;
            }
            let fast = compute_sdm(&mask).unwrap();
            let slow = brute_force_sdm(&mask).unwrap();
            for (a, b) in fast.values().iter().zip(slow.values()) {
                assert!((a - b).abs() < 1e-9, "fast {a} vs brute {b}");
            }
        }
    }

    #[test]
    fn normalize_handles_one_sided_maps_and_is_idempotent() {
        let raw = ScalarField::new(1, 3, vec![0.0, 2.0, 4.0], FieldKind::RawSdm).unwrap();
        let norm = normalize_sdm(&raw);
        assert_eq!(norm.values(), &[0.0, 0.5, 1.0]);
        let again = normalize_sdm(&norm);
        assert_eq!(again.values(), norm.values());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn normalize_is_idempotent_and_order_preserving(
                values in proptest::collection::vec(-100.0f64..100.0, 1..64)
            ) {
                let n = values.len();
                let raw = ScalarField::new(1, n, values, FieldKind::RawSdm).unwrap();
                let once = normalize_sdm(&raw);
                let twice = normalize_sdm(&once);
                prop_assert_eq!(once.values(), twice.values());
                // Scaling by positive constants preserves order.
                for i in 0..n {
                    for j in 0..n {
                        let (a, b) = (raw.values()[i], raw.values()[j]);
                        let (na, nb) = (once.values()[i], once.values()[j]);
                        if a < b {
                            prop_assert!(na <= nb);
                        }
                    }
                }
            }
        }
    }
}
