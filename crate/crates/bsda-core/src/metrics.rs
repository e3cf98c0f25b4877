//! Segmentation overlap/surface metrics and classification reports.
//! All scores are percentages except ASD and HD95, which are in pixels.

use crate::dist::edt;
use crate::mask::{extract_boundary, BinaryMask};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("masks have different shapes: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("surface distances need nonempty foreground in both masks")]
    EmptyForeground,
    #[error("no distances to aggregate")]
    EmptyDistances,
    #[error("confusion matrix has no observations")]
    EmptyMatrix,
    #[error("chance agreement is 1, kappa undefined")]
    DegenerateKappa,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
}

fn check_shapes(a: &BinaryMask, b: &BinaryMask) -> Result<(), MetricError> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(MetricError::ShapeMismatch(a.height(), a.width(), b.height(), b.width()));
    }
    Ok(())
}

/// Dice and Jaccard overlap in percent. Two empty masks agree perfectly and
/// score 100; an empty mask against a nonempty one scores 0.
pub fn dice_jaccard(pred: &BinaryMask, gt: &BinaryMask) -> Result<(f64, f64), MetricError> {
    check_shapes(pred, gt)?;
    let mut inter = 0u64;
    let mut p = 0u64;
    let mut g = 0u64;
    for (&a, &b) in pred.cells().iter().zip(gt.cells()) {
        p += a as u64;
        g += b as u64;
        inter += (a && b) as u64;
    }
    if p + g == 0 {
        return Ok((100.0, 100.0));
    }
    let dice = 200.0 * inter as f64 / (p + g) as f64;
    let union = p + g - inter;
    let jaccard = 100.0 * inter as f64 / union as f64;
    Ok((dice, jaccard))
}

/// Distances from each predicted boundary pixel to the nearest ground-truth
/// boundary pixel, and vice versa. Each list follows the canonical
/// (row-major) order of its own boundary set.
pub fn surface_distances(
    pred: &BinaryMask,
    gt: &BinaryMask,
) -> Result<(Vec<f64>, Vec<f64>), MetricError> {
    check_shapes(pred, gt)?;
    if pred.foreground_count() == 0 || gt.foreground_count() == 0 {
        return Err(MetricError::EmptyForeground);
    }
    let pb = extract_boundary(pred);
    let gb = extract_boundary(gt);
    let to_gt = edt(&gb.to_mask()).expect("nonempty boundary");
    let to_pred = edt(&pb.to_mask()).expect("nonempty boundary");
    let d_pg = pb.points().iter().map(|&(r, c)| to_gt.get(r, c)).collect();
    let d_gp = gb.points().iter().map(|&(r, c)| to_pred.get(r, c)).collect();
    Ok((d_pg, d_gp))
}

/// Average symmetric surface distance: pooled mean over both directions.
pub fn asd(d_pg: &[f64], d_gp: &[f64]) -> Result<f64, MetricError> {
    let n = d_pg.len() + d_gp.len();
    if n == 0 {
        return Err(MetricError::EmptyDistances);
    }
    let sum: f64 = d_pg.iter().chain(d_gp.iter()).sum();
    Ok(sum / n as f64)
}

/// Nearest-rank percentile: value at 1-based index ceil(p/100 * n) of the
/// sorted list.
fn percentile_nearest_rank(values: &[f64], p: f64) -> f64 {
    debug_assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// 95th-percentile Hausdorff distance: the larger of the two per-direction
/// nearest-rank 95th percentiles.
pub fn hd95(d_pg: &[f64], d_gp: &[f64]) -> Result<f64, MetricError> {
    if d_pg.is_empty() || d_gp.is_empty() {
        return Err(MetricError::EmptyDistances);
    }
    Ok(percentile_nearest_rank(d_pg, 95.0).max(percentile_nearest_rank(d_gp, 95.0)))
}

/// Per-sample segmentation score. `surface` is absent when either mask has
/// no foreground, in which case the distance metrics are undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskScore {
    pub dice: f64,
    pub jaccard: f64,
    pub surface: Option<SurfaceScore>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceScore {
    pub asd: f64,
    pub hd95: f64,
}

pub fn score_masks(pred: &BinaryMask, gt: &BinaryMask) -> Result<MaskScore, MetricError> {
    let (dice, jaccard) = dice_jaccard(pred, gt)?;
    let surface = match surface_distances(pred, gt) {
        Ok((d_pg, d_gp)) => Some(SurfaceScore {
            asd: asd(&d_pg, &d_gp)?,
            hd95: hd95(&d_pg, &d_gp)?,
        }),
        Err(MetricError::EmptyForeground) => None,
        Err(e) => return Err(e),
    };
    Ok(MaskScore { dice, jaccard, surface })
}

/// Row = true class, column = predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        assert!(classes >= 1, "need at least one class");
        Self { classes, counts: vec![0; classes * classes] }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn add(&mut self, truth: usize, pred: usize) -> Result<(), MetricError> {
        for label in [truth, pred] {
            if label >= self.classes {
                return Err(MetricError::LabelOutOfRange { label, classes: self.classes });
            }
        }
        self.counts[truth * self.classes + pred] += 1;
        Ok(())
    }

    pub fn count(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn from_rows(rows: &[&[u64]]) -> Self {
        let classes = rows.len();
        assert!(rows.iter().all(|r| r.len() == classes), "matrix must be square");
        Self { classes, counts: rows.iter().flat_map(|r| r.iter().copied()).collect() }
    }
}

/// All rates in percent. Conventions: a per-class rate with a zero
/// denominator is 0; the weighted average weighs by true-class support.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub support: Vec<u64>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub accuracy: f64,
    pub kappa: f64,
}

pub fn classification_report(cm: &ConfusionMatrix) -> Result<ClassReport, MetricError> {
    let k = cm.classes();
    let total = cm.total();
    if total == 0 {
        return Err(MetricError::EmptyMatrix);
    }
    let row_sum: Vec<u64> = (0..k).map(|t| (0..k).map(|p| cm.count(t, p)).sum()).collect();
    let col_sum: Vec<u64> = (0..k).map(|p| (0..k).map(|t| cm.count(t, p)).sum()).collect();

    // Chance agreement compared in exact integers so the degenerate case
    // (everything in one class) is detected without rounding doubt.
    let pe_num: u128 = (0..k).map(|c| row_sum[c] as u128 * col_sum[c] as u128).sum();
    let pe_den: u128 = (total as u128) * (total as u128);
    if pe_num == pe_den {
        return Err(MetricError::DegenerateKappa);
    }

    let rate = |num: u64, den: u64| if den == 0 { 0.0 } else { 100.0 * num as f64 / den as f64 };
    let mut precision = Vec::with_capacity(k);
    let mut recall = Vec::with_capacity(k);
    let mut f1 = Vec::with_capacity(k);
    for c in 0..k {
        let tp = cm.count(c, c);
        let p = rate(tp, col_sum[c]);
        let r = rate(tp, row_sum[c]);
        precision.push(p);
        recall.push(r);
        f1.push(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) });
    }

    let mean = |v: &[f64]| v.iter().sum::<f64>() / k as f64;
    let weighted = |v: &[f64]| {
        v.iter()
            .zip(&row_sum)
            .map(|(x, &w)| x * w as f64)
            .sum::<f64>()
            / total as f64
    };

    let trace: u64 = (0..k).map(|c| cm.count(c, c)).sum();
    let p_o = trace as f64 / total as f64;
    let p_e = pe_num as f64 / pe_den as f64;
    let kappa = 100.0 * (p_o - p_e) / (1.0 - p_e);

    Ok(ClassReport {
        macro_precision: mean(&precision),
        macro_recall: mean(&recall),
        macro_f1: mean(&f1),
        weighted_precision: weighted(&precision),
        weighted_recall: weighted(&recall),
        weighted_f1: weighted(&f1),
        precision,
        recall,
        f1,
        support: row_sum,
        accuracy: 100.0 * p_o,
        kappa,
    })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    // Population standard deviation; well defined for a single sample.
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-sample segmentation CSV with a trailing mean±std summary row.
/// Samples without surface scores print `err` cells and are excluded from
/// the ASD/HD95 summary.
pub fn seg_csv(rows: &[(String, MaskScore)]) -> String {
    let mut out = String::from("sample,dice,jaccard,asd,hd95\n");
    for (id, score) in rows {
        match &score.surface {
            Some(s) => out.push_str(&format!(
                "{id},{:.4},{:.4},{:.4},{:.4}\n",
                score.dice, score.jaccard, s.asd, s.hd95
            )),
            None => out.push_str(&format!("{id},{:.4},{:.4},err,err\n", score.dice, score.jaccard)),
        }
    }
    if !rows.is_empty() {
        let col = |f: &dyn Fn(&MaskScore) -> Option<f64>| -> String {
            let vals: Vec<f64> = rows.iter().filter_map(|(_, s)| f(s)).collect();
            if vals.is_empty() {
                return "err".into();
            }
            let (m, s) = mean_std(&vals);
            format!("{m:.4}\u{b1}{s:.4}")
        };
        out.push_str(&format!(
            "mean\u{b1}std,{},{},{},{}\n",
            col(&|s| Some(s.dice)),
            col(&|s| Some(s.jaccard)),
            col(&|s| s.surface.map(|x| x.asd)),
            col(&|s| s.surface.map(|x| x.hd95)),
        ));
    }
    out
}

/// Per-class report CSV followed by macro/weighted averages, accuracy, and
/// kappa rows.
pub fn classification_csv(report: &ClassReport, class_names: &[String]) -> String {
    assert_eq!(class_names.len(), report.precision.len());
    let total: u64 = report.support.iter().sum();
    let mut out = String::from("class,precision,recall,f1,support\n");
    for (i, name) in class_names.iter().enumerate() {
        out.push_str(&format!(
            "{name},{:.2},{:.2},{:.2},{}\n",
            report.precision[i], report.recall[i], report.f1[i], report.support[i]
        ));
    }
    out.push_str(&format!(
        "macro_avg,{:.2},{:.2},{:.2},{total}\n",
        report.macro_precision, report.macro_recall, report.macro_f1
    ));
    out.push_str(&format!(
        "weighted_avg,{:.2},{:.2},{:.2},{total}\n",
        report.weighted_precision, report.weighted_recall, report.weighted_f1
    ));
    out.push_str(&format!("accuracy,{:.2},,,\n", report.accuracy));
    out.push_str(&format!("kappa,{:.2},,,\n", report.kappa));
    out
}
