//! Target generation, evaluation metrics, file formats, and a synthetic
//! dataset for boundary-aware lesion segmentation experiments.

pub mod dataset;
pub mod dist;
pub mod field;
pub mod heatmap;
pub mod io;
pub mod mask;
pub mod metrics;
pub mod synth;

pub use dataset::{
    class_names, load_dataset, read_manifest, write_manifest, Dataset, DatasetError, LoadedSample,
    ManifestEntry, Split,
};
pub use dist::{brute_force_sdm, compute_sdm, edt, edt_sq, normalize_sdm, DistError};
pub use field::{FieldError, FieldKind, ScalarField};
pub use heatmap::{
    boundary_heatmap, gaussian_field, heatsum, HeatmapError, HeatmapParams,
};
pub use mask::{extract_boundary, partition, BinaryMask, BoundarySet, MaskError, Partition};
pub use metrics::{
    classification_csv, classification_report, dice_jaccard, hd95, score_masks, seg_csv,
    surface_distances, ClassReport, ConfusionMatrix, MaskScore, MetricError, SurfaceScore,
};
pub use synth::{
    compactness, gen_dataset, gen_sample, mask_area, perimeter, rasterize_star, sample_rng,
    DepthTwoStump, ShapeClass, SynthConfig, SynthError, SHAPE_CLASSES,
};
