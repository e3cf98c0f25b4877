//! Trained-model evaluation: region logits thresholded at sigmoid >= 0.5
//! (equivalently logits >= 0) become binary masks scored per sample;
//! class logits argmax into a confusion matrix.

use crate::graph::Graph;
use crate::model::{BsdaModel, ModelError};
use crate::tensor::Tensor;
use bsda_core::{
    classification_report, score_masks, BinaryMask, ClassReport, ConfusionMatrix, LoadedSample,
    MaskScore,
};

#[derive(Debug, Clone)]
pub struct SegSummary {
    pub rows: Vec<(String, MaskScore)>,
    pub mean_dice: f64,
    pub mean_jaccard: f64,
    /// Means over the samples whose surface distances are defined.
    pub mean_asd: Option<f64>,
    pub mean_hd95: Option<f64>,
    /// Samples where either mask had no foreground.
    pub surface_errors: usize,
}

#[derive(Debug, Clone)]
pub struct ClsSummary {
    pub confusion: ConfusionMatrix,
    pub report: ClassReport,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub seg: SegSummary,
    /// Absent when the classifier is ablated away.
    pub cls: Option<ClsSummary>,
}

/// Folds per-sample scores into split-level means. Surface means skip the
/// samples without surfaces instead of poisoning the aggregate.
pub fn summarize(rows: Vec<(String, MaskScore)>) -> SegSummary {
    let n = rows.len() as f64;
    let mean_dice = rows.iter().map(|(_, s)| s.dice).sum::<f64>() / n;
    let mean_jaccard = rows.iter().map(|(_, s)| s.jaccard).sum::<f64>() / n;
    let surf: Vec<_> = rows.iter().filter_map(|(_, s)| s.surface).collect();
    let surface_errors = rows.len() - surf.len();
    let (mean_asd, mean_hd95) = if surf.is_empty() {
        (None, None)
    } else {
        let k = surf.len() as f64;
        (
            Some(surf.iter().map(|s| s.asd).sum::<f64>() / k),
            Some(surf.iter().map(|s| s.hd95).sum::<f64>() / k),
        )
    };
    SegSummary { rows, mean_dice, mean_jaccard, mean_asd, mean_hd95, surface_errors }
}

/// Scores the model on the given samples. Runs in eval mode (running
/// batchnorm statistics, any batch size).
pub fn evaluate(
    model: &mut BsdaModel,
    samples: &[LoadedSample],
    batch_size: usize,
) -> Result<EvalReport, ModelError> {
    if samples.is_empty() {
        return Err(ModelError::DataEmpty);
    }
    let side = model.cfg.image_size;
    let classify = model.has_classifier();
    let mut rows = Vec::with_capacity(samples.len());
    let mut cm = ConfusionMatrix::new(model.n_classes);
    let mut any_cls = false;

    for chunk in samples.chunks(batch_size.max(1)) {
        let n = chunk.len();
        let mut pixels = Vec::with_capacity(n * side * side);
        for s in chunk {
            if s.image.height() != side || s.image.width() != side {
                return Err(ModelError::ShapeMismatch(format!(
                    "sample {}: image {}x{}, model expects {side}x{side}",
                    s.id,
                    s.image.height(),
                    s.image.width()
                )));
            }
            pixels.extend_from_slice(s.image.values());
        }
        let images = Tensor::new(vec![n, 1, side, side], pixels).expect("validated");

        let mut g = Graph::new(false);
        let bound = model.bind(&mut g);
        let img_node = g.leaf(images, false);
        let out = model.forward_segmentor(&mut g, &bound, img_node)?;
        let logits_cls = if classify {
            Some(model.fuse_and_classify(&mut g, &bound, img_node, &out.pyr)?)
        } else {
            None
        };

        let p_s = g.value(out.p_s).data();
        for (i, s) in chunk.iter().enumerate() {
            let plane = &p_s[i * side * side..(i + 1) * side * side];
            let cells: Vec<bool> = plane.iter().map(|&z| z >= 0.0).collect();
            let pred = BinaryMask::new(side, side, cells).expect("square plane");
            let score = score_masks(&pred, &s.mask)
                .map_err(|e| ModelError::Target(format!("sample {}: {e}", s.id)))?;
            rows.push((s.id.clone(), score));
        }

        if let Some(node) = logits_cls {
            let logits = g.value(node).data();
            let k = model.n_classes;
            for (i, s) in chunk.iter().enumerate() {
                let row = &logits[i * k..(i + 1) * k];
                let pred = row
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite logits"))
                    .map(|(j, _)| j)
                    .expect("nonzero classes");
                cm.add(s.label, pred)
                    .map_err(|e| ModelError::Target(format!("sample {}: {e}", s.id)))?;
                any_cls = true;
            }
        }
    }

    let cls = if any_cls {
        let report = classification_report(&cm)
            .map_err(|e| ModelError::Target(format!("classification report: {e}")))?;
        Some(ClsSummary { confusion: cm, report })
    } else {
        None
    };
    Ok(EvalReport { seg: summarize(rows), cls })
}
