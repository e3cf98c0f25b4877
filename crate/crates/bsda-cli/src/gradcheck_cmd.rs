use bsda_nn::check_all_ops;

use crate::error::CliError;

pub fn run(seed: Option<u64>, seeds: usize, corrupt: Option<&str>) -> Result<(), CliError> {
    if seeds == 0 {
        return Err(CliError::Config("--seeds must be at least 1".into()));
    }
    let results = check_all_ops(seed.unwrap_or(0), seeds, corrupt);
    println!("{:<16} {:>14} {:>11}  result", "op", "max rel err", "threshold");
    let mut failures = 0usize;
    for r in &results {
        println!(
            "{:<16} {:>14.3e} {:>11.1e}  {}",
            r.op,
            r.max_rel_err,
            r.threshold,
            if r.passed() { "pass" } else { "FAIL" },
        );
        failures += usize::from(!r.passed());
    }
    println!("{} ops checked over {} seeds", results.len(), seeds);
    if failures > 0 {
        return Err(CliError::SelfCheck(format!(
            "{failures} of {} gradient checks failed",
            results.len()
        )));
    }
    Ok(())
}
