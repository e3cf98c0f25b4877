//! Synthetic shape dataset: star-convex blobs on textured backgrounds.
//!
//! Three classes differ only in geometry, so class identity is recoverable
//! from the mask alone: `normal` mid-sized and smooth, `enlarged_irregular`
//! large with a strongly perturbed boundary, `reduced` small and smooth.

use crate::dataset::{write_manifest, ManifestEntry, Split};
use crate::field::{FieldKind, ScalarField};
use crate::io::{field_to_gray, mask_to_gray, write_pgm, FormatError};
use crate::mask::{partition, BinaryMask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("could not draw a non-degenerate {class} shape in {attempts} attempts")]
    DegenerateShape { class: &'static str, attempts: usize },
    #[error(transparent)]
    Format(#[from] FormatError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeClass {
    Normal,
    EnlargedIrregular,
    Reduced,
}

pub const SHAPE_CLASSES: [ShapeClass; 3] =
    [ShapeClass::Normal, ShapeClass::EnlargedIrregular, ShapeClass::Reduced];

impl ShapeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ShapeClass::Normal => "normal",
            ShapeClass::EnlargedIrregular => "enlarged_irregular",
            ShapeClass::Reduced => "reduced",
        }
    }

    /// Base radius range as a fraction of the image size.
    pub fn radius_fraction_range(self) -> (f64, f64) {
        match self {
            ShapeClass::Normal => (0.12, 0.18),
            ShapeClass::EnlargedIrregular => (0.22, 0.30),
            ShapeClass::Reduced => (0.06, 0.10),
        }
    }

    /// Relative amplitude of the radial boundary perturbation.
    pub fn perturbation_amplitude(self) -> f64 {
        match self {
            ShapeClass::Normal => 0.06,
            ShapeClass::EnlargedIrregular => 0.25,
            ShapeClass::Reduced => 0.04,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub image_size: usize,
    pub n_per_class: usize,
    pub seed: u64,
    /// Peak-to-peak half-range of the background value noise around 0.6.
    pub texture_amplitude: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { image_size: 64, n_per_class: 100, seed: 0, texture_amplitude: 0.2 }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.image_size < 16 {
            return Err(SynthError::ConfigInvalid(format!(
                "image_size {} below minimum 16",
                self.image_size
            )));
        }
        if self.n_per_class == 0 {
            return Err(SynthError::ConfigInvalid("n_per_class must be positive".into()));
        }
        if !(0.0..=0.4).contains(&self.texture_amplitude) {
            return Err(SynthError::ConfigInvalid(format!(
                "texture_amplitude {} outside [0, 0.4]",
                self.texture_amplitude
            )));
        }
        Ok(())
    }
}

/// Fills a mask with the star-convex region
/// `r(theta) = r0 * (1 + amp * sum_k b_k cos(k theta + phi_k))`
/// around `center` (row, col in pixel units). `harmonics` holds (b_k, phi_k)
/// for k = 1.. in order.
pub fn rasterize_star(
    size: usize,
    center: (f64, f64),
    r0: f64,
    amp: f64,
    harmonics: &[(f64, f64)],
) -> BinaryMask {
    let mut mask = BinaryMask::filled(size, size, false).expect("size >= 1");
    for r in 0..size {
        for c in 0..size {
            let dy = r as f64 - center.0;
            let dx = c as f64 - center.1;
            let dist = (dy * dy + dx * dx).sqrt();
            let theta = dy.atan2(dx);
            let mut wobble = 0.0;
            for (k, &(b, phi)) in harmonics.iter().enumerate() {
                wobble += b * ((k + 1) as f64 * theta + phi).cos();
            }
            if dist <= r0 * (1.0 + amp * wobble) {
                mask.set(r, c, true);
            }
        }
    }
    mask
}

const HARMONICS: usize = 5;
const MAX_ATTEMPTS: usize = 10;
const MIN_RADIUS_PX: f64 = 3.0;
const MIN_FOREGROUND_PX: usize = 8;
const FOREGROUND_INTENSITY: f64 = 0.2;
const BACKGROUND_INTENSITY: f64 = 0.6;
const NOISE_CELL_PX: usize = 8;

/// Smooth value noise in [-1, 1]: a coarse lattice of uniform draws,
/// bilinearly interpolated.
fn value_noise(size: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let cells = size.div_ceil(NOISE_CELL_PX) + 1;
    let lattice: Vec<f64> = (0..cells * cells).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut out = vec![0.0; size * size];
    for r in 0..size {
        for c in 0..size {
            let fy = r as f64 / NOISE_CELL_PX as f64;
            let fx = c as f64 / NOISE_CELL_PX as f64;
            let (y0, x0) = (fy as usize, fx as usize);
            let (ty, tx) = (fy - y0 as f64, fx - x0 as f64);
            let at = |y: usize, x: usize| lattice[y * cells + x];
            let top = at(y0, x0) * (1.0 - tx) + at(y0, x0 + 1) * tx;
            let bot = at(y0 + 1, x0) * (1.0 - tx) + at(y0 + 1, x0 + 1) * tx;
            out[r * size + c] = top * (1.0 - ty) + bot * ty;
        }
    }
    out
}

/// 3x3 box blur with clamp-to-edge borders.
fn box_blur(size: usize, values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; size * size];
    for r in 0..size {
        for c in 0..size {
            let mut sum = 0.0;
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let rr = (r as i64 + dr).clamp(0, size as i64 - 1) as usize;
                    let cc = (c as i64 + dc).clamp(0, size as i64 - 1) as usize;
                    sum += values[rr * size + cc];
                }
            }
            out[r * size + c] = sum / 9.0;
        }
    }
    out
}

/// One sample: a dark star-convex blob on a bright noisy background,
/// mildly blurred, plus its exact mask. Draws are retried up to 10 times if
/// the shape degenerates (tiny radius, under 8 foreground pixels, or no
/// interior/exterior left).
pub fn gen_sample(
    class: ShapeClass,
    image_size: usize,
    texture_amplitude: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(ScalarField, BinaryMask), SynthError> {
    let size = image_size;
    let (lo, hi) = class.radius_fraction_range();
    for _ in 0..MAX_ATTEMPTS {
        let r0 = rng.random_range(lo..hi) * size as f64;
        let center = (
            size as f64 / 2.0 + rng.random_range(-0.1..0.1) * size as f64,
            size as f64 / 2.0 + rng.random_range(-0.1..0.1) * size as f64,
        );
        let mut harmonics = [(0.0f64, 0.0f64); HARMONICS];
        let mut total = 0.0;
        for h in &mut harmonics {
            h.0 = rng.random_range(-1.0..1.0);
            h.1 = rng.random_range(0.0..std::f64::consts::TAU);
            total += h.0.abs();
        }
        if total > 0.0 {
            // Sum of |b_k| = 1 bounds the relative wobble by the amplitude.
            for h in &mut harmonics {
                h.0 /= total;
            }
        }

        if r0 < MIN_RADIUS_PX {
            continue;
        }
        let mask = rasterize_star(size, center, r0, class.perturbation_amplitude(), &harmonics);
        if mask.foreground_count() < MIN_FOREGROUND_PX {
            continue;
        }
        let part = partition(&mask);
        if part.interior.is_empty() || part.exterior.is_empty() {
            continue;
        }

        let noise = value_noise(size, rng);
        let mut values = vec![0.0; size * size];
        for idx in 0..size * size {
            values[idx] = if mask.cells()[idx] {
                FOREGROUND_INTENSITY
            } else {
                BACKGROUND_INTENSITY + texture_amplitude * noise[idx]
            };
        }
        let mut values = box_blur(size, &values);
        for v in &mut values {
            *v = v.clamp(0.0, 1.0);
        }
        let image = ScalarField::new_unchecked(size, size, values, FieldKind::Other);
        return Ok((image, mask));
    }
    Err(SynthError::DegenerateShape { class: class.as_str(), attempts: MAX_ATTEMPTS })
}

/// RNG for one sample id, independent of generation order: mixes the
/// dataset seed with an FNV-1a hash of the id, so a sample can be
/// regenerated in isolation byte-identically.
pub fn sample_rng(seed: u64, id: &str) -> ChaCha8Rng {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in id.as_bytes() {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ hash)
}

fn split_for_index(index: usize, n: usize) -> Split {
    let n_test = (0.2 * n as f64 + 0.5).floor() as usize;
    let n_val = (0.1 * n as f64 + 0.5).floor() as usize;
    let n_train = n - n_test - n_val;
    if index < n_train {
        Split::Train
    } else if index < n_train + n_val {
        Split::Val
    } else {
        Split::Test
    }
}

/// Generates the dataset tree:
///   out/images/<id>.pgm   8-bit grayscale images
///   out/masks/<id>.pgm    0/255 masks
///   out/manifest.csv      id,class,split
///   out/config.json       the generating config
/// Stratified 70/10/20 train/val/test split per class, assigned by index.
pub fn gen_dataset(config: &SynthConfig, out_dir: &Path) -> Result<Vec<ManifestEntry>, SynthError> {
    config.validate()?;
    let images_dir = out_dir.join("images");
    let masks_dir = out_dir.join("masks");
    for dir in [&images_dir, &masks_dir] {
        std::fs::create_dir_all(dir).map_err(|e| FormatError::io(dir, e))?;
    }

    let mut entries = Vec::new();
    for &class in &SHAPE_CLASSES {
        for i in 0..config.n_per_class {
            let id = format!("{}_{i:03}", class.as_str());
            let mut rng = sample_rng(config.seed, &id);
            let (image, mask) =
                gen_sample(class, config.image_size, config.texture_amplitude, &mut rng)?;
            write_pgm(&images_dir.join(format!("{id}.pgm")), &field_to_gray(&image))?;
            write_pgm(&masks_dir.join(format!("{id}.pgm")), &mask_to_gray(&mask))?;
            entries.push(ManifestEntry {
                id,
                class: class.as_str().to_string(),
                split: split_for_index(i, config.n_per_class),
            });
        }
    }
    write_manifest(&out_dir.join("manifest.csv"), &entries)?;

    let config_json = serde_json::to_string_pretty(config)
        .map_err(|e| SynthError::ConfigInvalid(e.to_string()))?;
    std::fs::write(out_dir.join("config.json"), config_json + "\n")
        .map_err(|e| FormatError::io(&out_dir.join("config.json"), e))?;
    Ok(entries)
}

/// Foreground pixel count.
pub fn mask_area(mask: &BinaryMask) -> usize {
    mask.foreground_count()
}

/// Boundary length estimate: the count of 4-adjacent foreground-background
/// edges (image border counts as background), scaled by pi/4. The scale is
/// the isotropic correction for axis-aligned edge counting; without it a
/// rasterized disc would measure 4/pi times its true perimeter.
pub fn perimeter(mask: &BinaryMask) -> f64 {
    let (h, w) = (mask.height(), mask.width());
    let mut edges = 0usize;
    for r in 0..h {
        for c in 0..w {
            if !mask.get(r, c) {
                continue;
            }
            edges += (r == 0 || !mask.get(r - 1, c)) as usize;
            edges += (r + 1 == h || !mask.get(r + 1, c)) as usize;
            edges += (c == 0 || !mask.get(r, c - 1)) as usize;
            edges += (c + 1 == w || !mask.get(r, c + 1)) as usize;
        }
    }
    edges as f64 * std::f64::consts::FRAC_PI_4
}

/// `4*pi*area / perimeter^2`: 1 for a disc, smaller for ragged shapes.
pub fn compactness(mask: &BinaryMask) -> f64 {
    let p = perimeter(mask);
    if p == 0.0 {
        return 0.0;
    }
    4.0 * std::f64::consts::PI * mask_area(mask) as f64 / (p * p)
}

/// Depth-2 decision tree over 2-feature samples; fit by exhaustive
/// threshold search. Verifies the classes stay separable from mask
/// geometry alone.
#[derive(Debug, Clone, Copy)]
pub struct DepthTwoStump {
    root: (usize, f64),
    // Child splits for the <= and > branches: feature, threshold, and the
    // labels for each side.
    children: [(usize, f64, usize, usize); 2],
}

impl DepthTwoStump {
    pub fn fit(features: &[[f64; 2]], labels: &[usize]) -> Self {
        assert_eq!(features.len(), labels.len());
        assert!(!features.is_empty());
        let idx: Vec<usize> = (0..features.len()).collect();
        let mut best = None;
        for (feat, thr) in candidate_splits(features, &idx) {
            let (le, gt): (Vec<usize>, Vec<usize>) =
                idx.iter().partition(|&&i| features[i][feat] <= thr);
            let (left, left_ok) = best_child(features, labels, &le);
            let (right, right_ok) = best_child(features, labels, &gt);
            let total = left_ok + right_ok;
            if best.map_or(true, |(score, _)| total > score) {
                best = Some((
                    total,
                    DepthTwoStump { root: (feat, thr), children: [left, right] },
                ));
            }
        }
        best.expect("at least one candidate split exists").1
    }

    pub fn predict(&self, features: [f64; 2]) -> usize {
        let side = (features[self.root.0] > self.root.1) as usize;
        let (feat, thr, le_label, gt_label) = self.children[side];
        if features[feat] <= thr {
            le_label
        } else {
            gt_label
        }
    }

    pub fn accuracy(&self, features: &[[f64; 2]], labels: &[usize]) -> f64 {
        let ok = features
            .iter()
            .zip(labels)
            .filter(|(f, &l)| self.predict(**f) == l)
            .count();
        ok as f64 / labels.len() as f64
    }
}

fn candidate_splits(features: &[[f64; 2]], idx: &[usize]) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for feat in 0..2 {
        let mut vals: Vec<f64> = idx.iter().map(|&i| features[i][feat]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).expect("finite features"));
        vals.dedup();
        for pair in vals.windows(2) {
            out.push((feat, (pair[0] + pair[1]) / 2.0));
        }
        if vals.len() == 1 {
            out.push((feat, vals[0]));
        }
    }
    out
}

fn majority(labels: &[usize], idx: &[usize]) -> (usize, usize) {
    let mut counts = std::collections::BTreeMap::new();
    for &i in idx {
        *counts.entry(labels[i]).or_insert(0usize) += 1;
    }
    counts
        .into_iter()
        .max_by_key(|&(label, n)| (n, std::cmp::Reverse(label)))
        .map(|(label, n)| (label, n))
        .unwrap_or((0, 0))
}

/// Best single split (or degenerate leaf) for one side of the root;
/// returns the split and its correct count.
fn best_child(
    features: &[[f64; 2]],
    labels: &[usize],
    idx: &[usize],
) -> ((usize, f64, usize, usize), usize) {
    if idx.is_empty() {
        return ((0, f64::INFINITY, 0, 0), 0);
    }
    let mut best = None;
    for (feat, thr) in candidate_splits(features, idx) {
        let (le, gt): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| features[i][feat] <= thr);
        let (le_label, le_ok) = majority(labels, &le);
        let (gt_label, gt_ok) = majority(labels, &gt);
        let score = le_ok + gt_ok;
        if best.map_or(true, |(s, _)| score > s) {
            best = Some((score, (feat, thr, le_label, gt_label)));
        }
    }
    let (score, split) = best.expect("nonempty side yields candidates");
    (split, score)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn reduced_class_area_stays_in_its_radius_band() {
        let size = 64usize;
        let (lo, hi) = ShapeClass::Reduced.radius_fraction_range();
        let amp = ShapeClass::Reduced.perturbation_amplitude();
        // Disc-area bounds widened by the perturbation and one boundary ring.
        let r_min = lo * size as f64;
        let r_max = hi * size as f64;
        let lower = PI * (r_min * (1.0 - amp)).powi(2) - 2.0 * PI * r_min - 4.0;
        let upper = PI * (r_max * (1.0 + amp)).powi(2) + 2.0 * PI * r_max + 4.0;
        for seed in 0..100 {
            let mut rng = sample_rng(seed, "area_probe");
            let (_, mask) = gen_sample(ShapeClass::Reduced, size, 0.2, &mut rng).unwrap();
            let area = mask_area(&mask) as f64;
            assert!(
                area >= lower && area <= upper,
                "seed {seed}: area {area} outside [{lower:.1}, {upper:.1}]"
            );
        }
    }

    #[test]
    fn class_areas_are_ordered() {
        let mut rng = sample_rng(42, "order_probe");
        let (_, small) = gen_sample(ShapeClass::Reduced, 64, 0.2, &mut rng).unwrap();
        let (_, mid) = gen_sample(ShapeClass::Normal, 64, 0.2, &mut rng).unwrap();
        let (_, large) = gen_sample(ShapeClass::EnlargedIrregular, 64, 0.2, &mut rng).unwrap();
        assert!(mask_area(&small) < mask_area(&mid));
        assert!(mask_area(&mid) < mask_area(&large));
    }

    #[test]
    fn unperturbed_star_is_compact() {
        // amp = 0 collapses the wobble: the raster disc must be near-round.
        let mask = rasterize_star(64, (32.0, 32.0), 10.0, 0.0, &[(1.0, 0.0)]);
        assert!(compactness(&mask) > 0.85, "compactness {}", compactness(&mask));
        // And off-center, non-integer radius still compact.
        let mask = rasterize_star(64, (29.3, 35.7), 8.6, 0.0, &[]);
        assert!(compactness(&mask) > 0.85);
    }

    #[test]
    fn perturbed_star_is_less_compact_than_disc() {
        // Weight on the high-frequency harmonics: a k=1 wobble mostly
        // translates the blob, while k=4..5 corrugates the boundary.
        let harmonics = [(0.1, 0.3), (0.1, 1.1), (0.2, 2.0), (0.3, 0.4), (0.3, 2.9)];
        let disc = rasterize_star(64, (32.0, 32.0), 16.0, 0.0, &harmonics);
        let wobbly = rasterize_star(64, (32.0, 32.0), 16.0, 0.25, &harmonics);
        assert!(compactness(&wobbly) < compactness(&disc));
    }

    #[test]
    fn generation_is_deterministic_per_seed_and_id() {
        let a = {
            let mut rng = sample_rng(7, "normal_003");
            gen_sample(ShapeClass::Normal, 64, 0.2, &mut rng).unwrap()
        };
        let b = {
            let mut rng = sample_rng(7, "normal_003");
            gen_sample(ShapeClass::Normal, 64, 0.2, &mut rng).unwrap()
        };
        assert_eq!(a.0.values(), b.0.values());
        assert_eq!(a.1, b.1);
        let c = {
            let mut rng = sample_rng(8, "normal_003");
            gen_sample(ShapeClass::Normal, 64, 0.2, &mut rng).unwrap()
        };
        assert_ne!(a.1, c.1, "different seed should give a different shape");
    }

    #[test]
    fn masks_always_have_interior_and_exterior() {
        for seed in 0..30 {
            for &class in &SHAPE_CLASSES {
                let mut rng = sample_rng(seed, "interior_probe");
                let (image, mask) = gen_sample(class, 64, 0.2, &mut rng).unwrap();
                let part = partition(&mask);
                assert!(!part.interior.is_empty());
                assert!(!part.exterior.is_empty());
                assert!(mask.foreground_count() >= MIN_FOREGROUND_PX);
                assert!(image.values().iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
        }
    }

    #[test]
    fn split_counts_follow_70_10_20() {
        let n = 100;
        let counts = (0..n).fold([0usize; 3], |mut acc, i| {
            match split_for_index(i, n) {
                Split::Train => acc[0] += 1,
                Split::Val => acc[1] += 1,
                Split::Test => acc[2] += 1,
            }
            acc
        });
        assert_eq!(counts, [70, 10, 20]);
        // Uneven class size deviates by at most one from exact stratification.
        let n = 33;
        let counts = (0..n).fold([0usize; 3], |mut acc, i| {
            match split_for_index(i, n) {
                Split::Train => acc[0] += 1,
                Split::Val => acc[1] += 1,
                Split::Test => acc[2] += 1,
            }
            acc
        });
        assert_eq!(counts.iter().sum::<usize>(), n);
        assert!((counts[0] as f64 - 0.7 * n as f64).abs() <= 1.0);
        assert!((counts[1] as f64 - 0.1 * n as f64).abs() <= 1.0);
        assert!((counts[2] as f64 - 0.2 * n as f64).abs() <= 1.0);
    }

    #[test]
    fn stump_separates_axis_aligned_clusters() {
        let features = vec![
            [1.0, 0.9], [1.2, 0.8], [0.9, 0.95],
            [5.0, 0.9], [5.5, 0.85], [4.8, 0.92],
            [5.2, 0.3], [4.9, 0.2], [5.1, 0.25],
        ];
        let labels = vec![0, 0, 0, 1, 1, 1, 2, 2, 2];
        let stump = DepthTwoStump::fit(&features, &labels);
        assert_eq!(stump.accuracy(&features, &labels), 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(SynthConfig::default().validate().is_ok());
        let bad = SynthConfig { image_size: 8, ..Default::default() };
        assert!(matches!(bad.validate(), Err(SynthError::ConfigInvalid(_))));
        let bad = SynthConfig { texture_amplitude: 0.9, ..Default::default() };
        assert!(matches!(bad.validate(), Err(SynthError::ConfigInvalid(_))));
        // Unknown keys are rejected at parse time.
        let err = serde_json::from_str::<SynthConfig>("{\"imagesize\": 64}");
        assert!(err.is_err());
    }
}
