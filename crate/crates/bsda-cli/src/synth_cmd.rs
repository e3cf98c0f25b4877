use std::path::Path;

use bsda_core::dataset::Split;
use bsda_core::synth::{gen_dataset, SynthError};

use crate::config::RunConfig;
use crate::error::CliError;

pub fn run(config: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let mut rc = RunConfig::load(config)?;
    if let Some(s) = seed {
        rc.seed = s;
    }
    let sc = rc.synth();
    let entries = gen_dataset(&sc, out).map_err(|e| match e {
        SynthError::ConfigInvalid(m) => CliError::Config(m),
        SynthError::Format(f) => CliError::Io(f.to_string()),
        e @ SynthError::DegenerateShape { .. } => CliError::SelfCheck(e.to_string()),
    })?;
    let count = |sp| entries.iter().filter(|e| e.split == sp).count();
    println!(
        "wrote {} samples to {} (train {}, val {}, test {})",
        entries.len(),
        out.display(),
        count(Split::Train),
        count(Split::Val),
        count(Split::Test),
    );
    Ok(())
}
