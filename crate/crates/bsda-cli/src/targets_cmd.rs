use std::path::Path;

use bsda_core::io::{gray_to_mask, read_pgm, write_bsdt, BsdtTensor};
use bsda_core::{boundary_heatmap, brute_force_sdm, compute_sdm, normalize_sdm, HeatmapParams};

use crate::error::CliError;

fn min_max(vals: &[f64]) -> (f64, f64) {
    vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

pub fn run(masks: &Path, out: &Path, sigma: f64, floor: f64, oracle: bool) -> Result<(), CliError> {
    if sigma <= 0.0 || floor < 0.0 {
        return Err(CliError::Config(format!(
            "sigma must be positive and floor nonnegative, got {sigma} and {floor}"
        )));
    }
    let mut names: Vec<String> = std::fs::read_dir(masks)
        .map_err(|e| CliError::Io(format!("{}: {e}", masks.display())))?
        .filter_map(|entry| {
            let name = entry.ok()?.file_name().into_string().ok()?;
            name.strip_suffix(".pgm").map(str::to_string)
        })
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(CliError::Io(format!("no .pgm masks under {}", masks.display())));
    }
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;

    let params = HeatmapParams { sigma, floor };
    let mut failed: Vec<String> = Vec::new();
    let mut oracle_worst = 0.0f64;
    for id in &names {
        let path = masks.join(format!("{id}.pgm"));
        // A bad mask only skips its own outputs.
        let result = read_pgm(&path).map_err(|e| e.to_string()).and_then(|gray| {
            let mask = gray_to_mask(&gray);
            let sdm = compute_sdm(&mask).map_err(|e| e.to_string())?;
            let bd = boundary_heatmap(&mask, &params).map_err(|e| e.to_string())?;
            Ok((mask, sdm, bd))
        });
        let (mask, sdm, bd) = match result {
            Ok(v) => v,
            Err(msg) => {
                eprintln!("error: {}: {msg}", path.display());
                failed.push(format!("{id}.pgm"));
                continue;
            }
        };
        if oracle {
            let brute = brute_force_sdm(&mask)
                .map_err(|e| CliError::SelfCheck(format!("{id}: {e}")))?;
            let diff = sdm
                .values()
                .iter()
                .zip(brute.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            oracle_worst = oracle_worst.max(diff);
        }
        let sdm = normalize_sdm(&sdm);
        for (suffix, field) in [("sdm", &sdm), ("bd", &bd)] {
            let dest = out.join(format!("{id}.{suffix}.bsdt"));
            write_bsdt(&dest, &BsdtTensor::from_field(field))
                .map_err(|e| CliError::Io(e.to_string()))?;
        }
        let (slo, shi) = min_max(sdm.values());
        let (blo, bhi) = min_max(bd.values());
        println!("{id}: sdm [{slo:.6}, {shi:.6}], bd [{blo:.6}, {bhi:.6}]");
    }

    if oracle {
        println!("oracle max abs diff: {oracle_worst:.3e}");
        if !(oracle_worst < 1e-9) {
            return Err(CliError::SelfCheck(format!(
                "distance transform disagrees with the brute-force oracle by {oracle_worst:.3e}"
            )));
        }
    }
    if !failed.is_empty() {
        return Err(CliError::MaskParse(format!(
            "{} of {} masks failed: {}",
            failed.len(),
            names.len(),
            failed.join(", ")
        )));
    }
    Ok(())
}
