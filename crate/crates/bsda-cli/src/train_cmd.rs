use std::path::Path;

use bsda_core::dataset::{load_dataset, Split};
use bsda_nn::checkpoint::save_model;
use bsda_nn::model::{Ablation, BsdaModel};
use bsda_nn::train::{prepare_samples, Trainer};

use crate::config::RunConfig;
use crate::error::{from_model, CliError};

pub fn run(
    config: Option<&Path>,
    data: Option<&Path>,
    out: &Path,
    ablate: Option<&str>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let mut rc = RunConfig::load(config)?;
    if let Some(s) = seed {
        rc.seed = s;
    }
    let data = match (data, &rc.data) {
        (Some(d), _) => d.to_path_buf(),
        (None, Some(d)) => d.clone(),
        (None, None) => {
            return Err(CliError::Config("no dataset: pass --data or set \"data\"".into()))
        }
    };
    let ablate = match ablate {
        Some(spec) => Ablation::parse(spec).map_err(CliError::Config)?,
        None => Ablation::FULL,
    };
    let cfg = rc.model();
    cfg.validate().map_err(from_model)?;

    let dataset = load_dataset(&data, Some(Split::Train))
        .map_err(|e| CliError::Io(format!("{}: {e}", data.display())))?;
    let model =
        BsdaModel::new(cfg.clone(), dataset.classes.len(), ablate).map_err(from_model)?;
    let samples = prepare_samples(&dataset.samples, cfg.sigma).map_err(from_model)?;
    println!(
        "training '{}' on {} samples, {} classes, {} epochs (classifier frozen through {})",
        ablate.label(),
        samples.len(),
        dataset.classes.len(),
        cfg.epochs,
        cfg.tau,
    );

    let mut trainer = Trainer::new(model, samples).map_err(from_model)?;
    for _ in 0..cfg.epochs {
        let e = trainer.run_epoch().map_err(from_model)?;
        println!(
            "epoch {:>4}  l_seg {:.6}  l_dice {:.6}  l_bd {:.6}  l_sd {:.6}  l_cl {:.6}  frozen {}",
            e.epoch,
            e.l_seg,
            e.l_dice,
            e.l_bd,
            e.l_sd,
            e.l_cl,
            u8::from(e.frozen),
        );
    }

    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let history = trainer.history_csv();
    let model = trainer.into_model();
    let ck_path = out.join("model.bsdc");
    save_model(&model, &ck_path).map_err(from_model)?;
    let hist_path = out.join("history.csv");
    std::fs::write(&hist_path, history)
        .map_err(|e| CliError::Io(format!("{}: {e}", hist_path.display())))?;
    println!("wrote {} and {}", ck_path.display(), hist_path.display());
    Ok(())
}
