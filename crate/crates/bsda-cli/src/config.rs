use std::path::{Path, PathBuf};

use bsda_core::synth::SynthConfig;
use bsda_nn::model::BsdaConfig;
use serde::Deserialize;

use crate::error::CliError;

/// One JSON document drives every command: the network and training
/// hyperparameters, the dataset generator knobs, and optional default
/// paths. Unknown keys are rejected so typos cannot silently fall back to
/// defaults.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub image_size: usize,
    pub widths: [usize; 4],
    pub decoder_width: usize,
    pub lambda: [f64; 4],
    pub sigma: f64,
    pub tau: usize,
    pub epochs: usize,
    pub lr_seg: f64,
    pub lr_cls: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub augment: bool,
    pub n_per_class: usize,
    pub texture_amplitude: f64,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = BsdaConfig::default();
        let s = SynthConfig::default();
        RunConfig {
            image_size: m.image_size,
            widths: m.widths,
            decoder_width: m.decoder_width,
            lambda: m.lambda,
            sigma: m.sigma,
            tau: m.tau,
            epochs: m.epochs,
            lr_seg: m.lr_seg,
            lr_cls: m.lr_cls,
            batch_size: m.batch_size,
            seed: m.seed,
            augment: m.augment,
            n_per_class: s.n_per_class,
            texture_amplitude: s.texture_amplitude,
            data: None,
            out: None,
        }
    }
}

impl RunConfig {
    /// Missing path means all defaults.
    pub fn load(path: Option<&Path>) -> Result<RunConfig, CliError> {
        let Some(path) = path else { return Ok(RunConfig::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }

    pub fn model(&self) -> BsdaConfig {
        BsdaConfig {
            image_size: self.image_size,
            widths: self.widths,
            decoder_width: self.decoder_width,
            lambda: self.lambda,
            sigma: self.sigma,
            tau: self.tau,
            epochs: self.epochs,
            lr_seg: self.lr_seg,
            lr_cls: self.lr_cls,
            batch_size: self.batch_size,
            seed: self.seed,
            augment: self.augment,
        }
    }

    pub fn synth(&self) -> SynthConfig {
        SynthConfig {
            image_size: self.image_size,
            n_per_class: self.n_per_class,
            seed: self.seed,
            texture_amplitude: self.texture_amplitude,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_library_configs() {
        let rc = RunConfig::default();
        let m = BsdaConfig::default();
        assert_eq!(rc.model().image_size, m.image_size);
        assert_eq!(rc.model().lambda, m.lambda);
        assert_eq!(rc.synth().n_per_class, SynthConfig::default().n_per_class);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<RunConfig>("{\"epochz\": 3}");
        assert!(err.is_err());
    }

    #[test]
    fn partial_documents_fill_from_defaults() {
        let rc: RunConfig = serde_json::from_str("{\"epochs\": 3, \"tau\": 1}").unwrap();
        assert_eq!(rc.epochs, 3);
        assert_eq!(rc.tau, 1);
        assert_eq!(rc.image_size, BsdaConfig::default().image_size);
    }
}
