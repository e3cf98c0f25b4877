//! Model snapshots as BSDC checkpoint files.
//!
//! Layout: one `meta.arch` record describing the architecture
//! (image_size, the four stage widths, decoder width, class count, and the
//! three ablation flags), then every parameter under its registry name,
//! then per-batchnorm running stats as `<bn>.rm` / `<bn>.rv`. Loading is
//! strict: unknown names, missing names, or shape drift are errors.

use crate::model::{Ablation, BsdaConfig, BsdaModel, ModelError};
use crate::tensor::Tensor;
use bsda_core::io::{read_bsdc, write_bsdc, BsdtData, BsdtTensor, Checkpoint};
use std::path::Path;

const META: &str = "meta.arch";

fn to_bsdt(t: &Tensor) -> BsdtTensor {
    let dims: Vec<u32> = t.shape().iter().map(|&d| d as u32).collect();
    // Scalars (empty shape) are stored as dims [1].
    let dims = if dims.is_empty() { vec![1] } else { dims };
    BsdtTensor::new(dims, BsdtData::F64(t.data().to_vec())).expect("in-memory tensor is valid")
}

fn vec_record(v: &[f64]) -> BsdtTensor {
    BsdtTensor::new(vec![v.len() as u32], BsdtData::F64(v.to_vec())).expect("valid")
}

pub fn model_to_checkpoint(m: &BsdaModel) -> Checkpoint {
    let mut ck = Checkpoint::new();
    let cfg = &m.cfg;
    let meta = [
        cfg.image_size as f64,
        cfg.widths[0] as f64,
        cfg.widths[1] as f64,
        cfg.widths[2] as f64,
        cfg.widths[3] as f64,
        cfg.decoder_width as f64,
        m.n_classes as f64,
        f64::from(m.ablate.no_b),
        f64::from(m.ablate.no_d),
        f64::from(m.ablate.no_cls),
    ];
    ck.push(META, vec_record(&meta)).expect("fresh checkpoint");
    for (name, t, _) in m.params_with_names() {
        ck.push(name, to_bsdt(t)).expect("unique parameter names");
    }
    for b in m.bn_buffers() {
        ck.push(&format!("{}.rm", b.name), vec_record(&b.running.mean)).expect("unique");
        ck.push(&format!("{}.rv", b.name), vec_record(&b.running.var)).expect("unique");
    }
    ck
}

pub fn save_model(m: &BsdaModel, path: &Path) -> Result<(), ModelError> {
    write_bsdc(path, &model_to_checkpoint(m))
        .map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))
}

/// Rebuilds the model from its meta record; training hyperparameters fall
/// back to `base` (defaults if None) since they do not affect inference.
pub fn model_from_checkpoint(ck: &Checkpoint, base: Option<BsdaConfig>) -> Result<BsdaModel, ModelError> {
    let meta = ck
        .get(META)
        .ok_or_else(|| ModelError::Checkpoint(format!("missing '{META}' record")))?;
    let v = match &meta.data {
        BsdtData::F64(v) if v.len() == 10 => v.clone(),
        _ => return Err(ModelError::Checkpoint(format!("'{META}' must hold 10 f64 values"))),
    };
    let as_usize = |x: f64, what: &str| -> Result<usize, ModelError> {
        if x.fract() == 0.0 && x >= 0.0 && x < 1e9 {
            Ok(x as usize)
        } else {
            Err(ModelError::Checkpoint(format!("{what} = {x} is not a valid count")))
        }
    };
    let mut cfg = base.unwrap_or_default();
    cfg.image_size = as_usize(v[0], "image_size")?;
    cfg.widths = [
        as_usize(v[1], "width")?,
        as_usize(v[2], "width")?,
        as_usize(v[3], "width")?,
        as_usize(v[4], "width")?,
    ];
    cfg.decoder_width = as_usize(v[5], "decoder_width")?;
    let n_classes = as_usize(v[6], "n_classes")?;
    let ablate = Ablation { no_b: v[7] != 0.0, no_d: v[8] != 0.0, no_cls: v[9] != 0.0 };

    let mut m = BsdaModel::new(cfg, n_classes, ablate)?;
    let mut expected = 1 + m.param_names().len() + 2 * m.bn_buffers().len();
    if ck.len() != expected {
        // Identify one offending name for the message.
        let known: std::collections::BTreeSet<String> = m
            .param_names()
            .iter()
            .cloned()
            .chain(m.bn_buffers().iter().flat_map(|b| {
                [format!("{}.rm", b.name), format!("{}.rv", b.name)]
            }))
            .chain([META.to_string()])
            .collect();
        for (name, _) in ck.records() {
            if !known.contains(name) {
                return Err(ModelError::Checkpoint(format!("unexpected record '{name}'")));
            }
        }
        expected -= 1; // meta already consumed conceptually
        return Err(ModelError::Checkpoint(format!(
            "checkpoint holds {} records, model needs {}",
            ck.len() - 1,
            expected
        )));
    }
    let names: Vec<String> = m.param_names().to_vec();
    for name in names {
        let rec = ck
            .get(&name)
            .ok_or_else(|| ModelError::Checkpoint(format!("missing parameter '{name}'")))?;
        let want = m.param(&name).expect("registry name").shape().to_vec();
        let got: Vec<usize> = rec.dims.iter().map(|&d| d as usize).collect();
        let want_cmp = if want.is_empty() { vec![1] } else { want.clone() };
        if got != want_cmp {
            return Err(ModelError::ShapeMismatch(format!(
                "parameter '{name}': checkpoint {got:?}, model {want:?}"
            )));
        }
        m.set_param(&name, Tensor::new(want, rec.data.to_f64()).expect("validated shape"))?;
    }
    for b in m.bn_buffers_mut() {
        for (suffix, slot) in [("rm", 0), ("rv", 1)] {
            let name = format!("{}.{suffix}", b.name);
            let rec = ck
                .get(&name)
                .ok_or_else(|| ModelError::Checkpoint(format!("missing buffer '{name}'")))?;
            let vals = rec.data.to_f64();
            let dst = if slot == 0 { &mut b.running.mean } else { &mut b.running.var };
            if vals.len() != dst.len() {
                return Err(ModelError::ShapeMismatch(format!(
                    "buffer '{name}': checkpoint {} values, model {}",
                    vals.len(),
                    dst.len()
                )));
            }
            *dst = vals;
        }
    }
    Ok(m)
}

pub fn load_model(path: &Path, base: Option<BsdaConfig>) -> Result<BsdaModel, ModelError> {
    let ck = read_bsdc(path).map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))?;
    model_from_checkpoint(&ck, base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use bsda_core::io::{read_bsdc_bytes, write_bsdc_bytes};

    fn tiny() -> BsdaModel {
        let cfg = BsdaConfig {
            image_size: 16,
            widths: [2, 4, 4, 4],
            decoder_width: 8,
            ..BsdaConfig::default()
        };
        BsdaModel::new(cfg, 3, Ablation::FULL).unwrap()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let mut m = tiny();
        // Make running stats nontrivial so the buffer path is exercised.
        m.bn_buffers_mut()[0].running.mean[0] = 0.123456789;
        m.bn_buffers_mut()[0].running.var[1] = 7.5;
        let ck = model_to_checkpoint(&m);
        let bytes = write_bsdc_bytes(&ck);
        let back = read_bsdc_bytes(&bytes).unwrap();
        let m2 = model_from_checkpoint(&back, None).unwrap();
        assert_eq!(m.n_classes, m2.n_classes);
        assert_eq!(m.ablate, m2.ablate);
        for (name, t, _) in m.params_with_names() {
            assert_eq!(t.data(), m2.param(name).unwrap().data(), "{name}");
        }
        for (a, b) in m.bn_buffers().iter().zip(m2.bn_buffers()) {
            assert_eq!(a.running.mean, b.running.mean);
            assert_eq!(a.running.var, b.running.var);
        }
        // And the re-written bytes are identical.
        assert_eq!(bytes, write_bsdc_bytes(&model_to_checkpoint(&m2)));
    }

    #[test]
    fn ablated_models_round_trip_their_flags() {
        let cfg = BsdaConfig {
            image_size: 16,
            widths: [2, 4, 4, 4],
            decoder_width: 8,
            ..BsdaConfig::default()
        };
        let m = BsdaModel::new(cfg, 3, Ablation::single_task()).unwrap();
        let ck = model_to_checkpoint(&m);
        let m2 = model_from_checkpoint(&ck, None).unwrap();
        assert_eq!(m2.ablate, Ablation::single_task());
        assert!(!m2.has_classifier());
    }

    #[test]
    fn shape_drift_is_rejected() {
        let m = tiny();
        let mut ck = Checkpoint::new();
        for (name, rec) in model_to_checkpoint(&m).records() {
            if name == "stem.conv.w" {
                // Same element count, different dims.
                let mut dims = rec.dims.clone();
                dims.swap(0, 1);
                ck.push(name, BsdtTensor::new(dims, rec.data.clone()).unwrap()).unwrap();
            } else {
                ck.push(name, rec.clone()).unwrap();
            }
        }
        assert!(matches!(
            model_from_checkpoint(&ck, None),
            Err(ModelError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn missing_and_extra_records_are_rejected() {
        let m = tiny();
        let full = model_to_checkpoint(&m);

        let mut missing = Checkpoint::new();
        for (name, rec) in full.records() {
            if name != "dec_s.head.b" {
                missing.push(name, rec.clone()).unwrap();
            }
        }
        assert!(model_from_checkpoint(&missing, None).is_err());

        let mut extra = Checkpoint::new();
        for (name, rec) in full.records() {
            extra.push(name, rec.clone()).unwrap();
        }
        extra.push("bogus.w", vec_record(&[1.0])).unwrap();
        let err = match model_from_checkpoint(&extra, None) {
            Err(e) => e,
            Ok(_) => panic!("extra record must be rejected"),
        };
        assert!(err.to_string().contains("bogus.w"), "{err}");
    }
}
