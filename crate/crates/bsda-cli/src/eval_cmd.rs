use std::path::Path;

use bsda_core::dataset::{load_dataset, Dataset, Split};
use bsda_core::{
    classification_csv, classification_report, score_masks, seg_csv, ConfusionMatrix,
};
use bsda_nn::checkpoint::load_model;
use bsda_nn::eval::{evaluate, EvalReport};

use crate::error::{from_model, CliError};

fn parse_split(s: &str) -> Result<Split, CliError> {
    Split::parse(s).ok_or_else(|| CliError::Config(format!("unknown split '{s}'")))
}

/// Scores every ground-truth mask against itself and treats labels as
/// perfectly predicted: a pipeline shakedown whose numbers are knowable in
/// advance (dice 100, distances 0, accuracy 1).
fn oracle_report(dataset: &Dataset) -> Result<EvalReport, CliError> {
    let mut rows = Vec::new();
    let mut cm = ConfusionMatrix::new(dataset.classes.len());
    for s in &dataset.samples {
        let score = score_masks(&s.mask, &s.mask)
            .map_err(|e| CliError::MaskParse(format!("sample {}: {e}", s.id)))?;
        rows.push((s.id.clone(), score));
        cm.add(s.label, s.label)
            .map_err(|e| CliError::SelfCheck(format!("sample {}: {e}", s.id)))?;
    }
    let report = classification_report(&cm)
        .map_err(|e| CliError::SelfCheck(format!("classification report: {e}")))?;
    Ok(EvalReport {
        seg: bsda_nn::eval::summarize(rows),
        cls: Some(bsda_nn::eval::ClsSummary { confusion: cm, report }),
    })
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    checkpoint: Option<&Path>,
    data: &Path,
    out: &Path,
    split: &str,
    batch: Option<usize>,
    oracle_gt: bool,
) -> Result<(), CliError> {
    let split = parse_split(split)?;
    let dataset = load_dataset(data, Some(split))
        .map_err(|e| CliError::Io(format!("{}: {e}", data.display())))?;
    if dataset.samples.is_empty() {
        return Err(CliError::Config(format!("split '{}' has no samples", split.as_str())));
    }

    let report = if oracle_gt {
        oracle_report(&dataset)?
    } else {
        let ck = checkpoint.ok_or_else(|| {
            CliError::Config("pass --checkpoint (or --oracle-gt for the shakedown mode)".into())
        })?;
        let mut model = load_model(ck, None).map_err(from_model)?;
        let batch = batch.unwrap_or(model.cfg.batch_size);
        evaluate(&mut model, &dataset.samples, batch).map_err(from_model)?
    };

    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let seg_path = out.join("seg_metrics.csv");
    std::fs::write(&seg_path, seg_csv(&report.seg.rows))
        .map_err(|e| CliError::Io(format!("{}: {e}", seg_path.display())))?;

    let fmt_opt = |v: Option<f64>| match v {
        Some(v) => format!("{v:.4}"),
        None => "n/a".to_string(),
    };
    println!(
        "{} samples: dice {:.2}, jaccard {:.2}, asd {}, hd95 {} ({} without surfaces)",
        report.seg.rows.len(),
        report.seg.mean_dice,
        report.seg.mean_jaccard,
        fmt_opt(report.seg.mean_asd),
        fmt_opt(report.seg.mean_hd95),
        report.seg.surface_errors,
    );
    println!("wrote {}", seg_path.display());

    if let Some(cls) = &report.cls {
        let cls_path = out.join("classification.csv");
        std::fs::write(&cls_path, classification_csv(&cls.report, &dataset.classes))
            .map_err(|e| CliError::Io(format!("{}: {e}", cls_path.display())))?;
        println!(
            "accuracy {:.2}, kappa {:.2}",
            cls.report.accuracy, cls.report.kappa,
        );
        println!("wrote {}", cls_path.display());
    } else {
        println!("classifier absent in this checkpoint; no classification report");
    }
    Ok(())
}
