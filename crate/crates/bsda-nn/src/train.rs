//! Two-phase joint training: segmentation-only while the classifier is
//! frozen (epochs 1..=tau), then joint updates with separate Adam states
//! for the segmentor and the classifier groups.

use crate::adam::AdamState;
use crate::graph::Graph;
use crate::model::{BsdaModel, ModelError, ParamGroup};
use crate::tensor::Tensor;
use bsda_core::{boundary_heatmap, compute_sdm, normalize_sdm, HeatmapParams, LoadedSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// One training sample with its precomputed regression targets, all row
/// major at the base orientation. Geometric augmentation transforms the
/// cached targets instead of recomputing them.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub id: String,
    pub label: usize,
    pub image: Vec<f64>,
    pub mask: Vec<f64>,
    pub bd: Vec<f64>,
    pub sd: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct EpochLosses {
    pub epoch: usize,
    pub l_seg: f64,
    pub l_dice: f64,
    pub l_bd: f64,
    pub l_sd: f64,
    pub l_cl: f64,
    pub frozen: bool,
}

/// Quarter-turn count plus axis flips; the only shape-exact transforms.
#[derive(Debug, Clone, Copy)]
pub struct GeoAug {
    pub quarter_turns: usize,
    pub hflip: bool,
    pub vflip: bool,
}

/// Clockwise quarter turn of a square row-major grid.
pub fn rot90(v: &[f64], side: usize) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for r in 0..side {
        for c in 0..side {
            out[c * side + (side - 1 - r)] = v[r * side + c];
        }
    }
    out
}

pub fn flip_h(v: &[f64], side: usize) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for r in 0..side {
        for c in 0..side {
            out[r * side + (side - 1 - c)] = v[r * side + c];
        }
    }
    out
}

pub fn flip_v(v: &[f64], side: usize) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for r in 0..side {
        for c in 0..side {
            out[(side - 1 - r) * side + c] = v[r * side + c];
        }
    }
    out
}

pub fn apply_geo(v: &[f64], side: usize, a: GeoAug) -> Vec<f64> {
    let mut out = v.to_vec();
    for _ in 0..a.quarter_turns % 4 {
        out = rot90(&out, side);
    }
    if a.hflip {
        out = flip_h(&out, side);
    }
    if a.vflip {
        out = flip_v(&out, side);
    }
    out
}

/// 3x3 box blur with replicated edges.
fn blur3(v: &[f64], side: usize) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    let cl = |x: isize| -> usize { x.clamp(0, side as isize - 1) as usize };
    for r in 0..side {
        for c in 0..side {
            let mut sum = 0.0;
            for dr in -1..=1isize {
                for dc in -1..=1isize {
                    sum += v[cl(r as isize + dr) * side + cl(c as isize + dc)];
                }
            }
            out[r * side + c] = sum / 9.0;
        }
    }
    out
}

/// Computes regression targets for each sample: the peak-normalized
/// boundary heatmap and the extreme-normalized signed distance map.
pub fn prepare_samples(
    samples: &[LoadedSample],
    sigma: f64,
) -> Result<Vec<TrainSample>, ModelError> {
    let params = HeatmapParams { sigma, ..HeatmapParams::default() };
    samples
        .iter()
        .map(|s| {
            let sdm = compute_sdm(&s.mask)
                .map_err(|e| ModelError::Target(format!("sample {}: {e}", s.id)))?;
            let sd = normalize_sdm(&sdm);
            let bd = boundary_heatmap(&s.mask, &params)
                .map_err(|e| ModelError::Target(format!("sample {}: {e}", s.id)))?;
            Ok(TrainSample {
                id: s.id.clone(),
                label: s.label,
                image: s.image.values().to_vec(),
                mask: s.mask.cells().iter().map(|&b| f64::from(b)).collect(),
                bd: bd.values().to_vec(),
                sd: sd.values().to_vec(),
            })
        })
        .collect()
}

pub struct Trainer {
    model: BsdaModel,
    samples: Vec<TrainSample>,
    adam_seg: AdamState,
    adam_cls: Option<AdamState>,
    rng: ChaCha8Rng,
    completed: usize,
    history: Vec<EpochLosses>,
}

struct Batch {
    images: Tensor,
    masks: Tensor,
    bds: Tensor,
    sds: Tensor,
    labels: Vec<usize>,
}

impl Trainer {
    pub fn new(model: BsdaModel, samples: Vec<TrainSample>) -> Result<Trainer, ModelError> {
        if samples.is_empty() {
            return Err(ModelError::DataEmpty);
        }
        let area = model.cfg.image_size * model.cfg.image_size;
        for s in &samples {
            if s.image.len() != area || s.mask.len() != area || s.bd.len() != area || s.sd.len() != area {
                return Err(ModelError::ShapeMismatch(format!(
                    "sample {}: expected {area} pixels per plane",
                    s.id
                )));
            }
        }
        let adam_seg = AdamState::new(model.cfg.lr_seg, &model.group_sizes(ParamGroup::Seg));
        let adam_cls = model
            .has_classifier()
            .then(|| AdamState::new(model.cfg.lr_cls, &model.group_sizes(ParamGroup::Cls)));
        // Distinct stream from parameter initialization, still seed-driven.
        let rng = ChaCha8Rng::seed_from_u64(model.cfg.seed ^ 0x7452_4149_4e31);
        Ok(Trainer { model, samples, adam_seg, adam_cls, rng, completed: 0, history: Vec::new() })
    }

    pub fn model(&self) -> &BsdaModel {
        &self.model
    }

    pub fn into_model(self) -> BsdaModel {
        self.model
    }

    pub fn history(&self) -> &[EpochLosses] {
        &self.history
    }

    pub fn completed_epochs(&self) -> usize {
        self.completed
    }

    fn augment_sample(&mut self, idx: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let side = self.model.cfg.image_size;
        let s = &self.samples[idx];
        if !self.model.cfg.augment {
            return (s.image.clone(), s.mask.clone(), s.bd.clone(), s.sd.clone());
        }
        let geo = GeoAug {
            quarter_turns: self.rng.random_range(0..4usize),
            hflip: self.rng.random_bool(0.5),
            vflip: self.rng.random_bool(0.5),
        };
        let mut img = apply_geo(&s.image, side, geo);
        let mask = apply_geo(&s.mask, side, geo);
        let bd = apply_geo(&s.bd, side, geo);
        let sd = apply_geo(&s.sd, side, geo);

        let contrast = self.rng.random_range(0.8..1.2);
        let noise_sigma = self.rng.random_range(0.0..0.05);
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        for v in &mut img {
            let centered = (*v - 0.5) * contrast + 0.5;
            let noisy = centered + noise_sigma * unit.sample(&mut self.rng);
            *v = noisy.clamp(0.0, 1.0);
        }
        if self.rng.random_bool(0.2) {
            img = blur3(&img, side);
        }
        (img, mask, bd, sd)
    }

    fn make_batch(&mut self, idxs: &[usize]) -> Batch {
        let side = self.model.cfg.image_size;
        let n = idxs.len();
        let mut images = Vec::with_capacity(n * side * side);
        let mut masks = Vec::with_capacity(n * side * side);
        let mut bds = Vec::with_capacity(n * side * side);
        let mut sds = Vec::with_capacity(n * side * side);
        let mut labels = Vec::with_capacity(n);
        for &i in idxs {
            let (img, mask, bd, sd) = self.augment_sample(i);
            images.extend(img);
            masks.extend(mask);
            bds.extend(bd);
            sds.extend(sd);
            labels.push(self.samples[i].label);
        }
        let shape = vec![n, 1, side, side];
        Batch {
            images: Tensor::new(shape.clone(), images).expect("validated sizes"),
            masks: Tensor::new(shape.clone(), masks).expect("validated sizes"),
            bds: Tensor::new(shape.clone(), bds).expect("validated sizes"),
            sds: Tensor::new(shape, sds).expect("validated sizes"),
            labels,
        }
    }

    /// Runs one epoch (1-based numbering continues from the last call) and
    /// returns its mean losses. The classifier participates only after
    /// epoch tau; before that it is neither run nor updated.
    pub fn run_epoch(&mut self) -> Result<EpochLosses, ModelError> {
        let epoch = self.completed + 1;
        let cfg = self.model.cfg.clone();
        let frozen = epoch <= cfg.tau;
        let joint = !frozen && self.model.has_classifier();

        let mut order: Vec<usize> = (0..self.samples.len()).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, self.rng.random_range(0..=i));
        }

        let mut sums = [0.0f64; 5];
        let mut seen = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            // Training-mode batchnorm needs at least two items.
            if chunk.len() < 2 {
                continue;
            }
            let batch = self.make_batch(chunk);
            let mut g = Graph::new(true);
            let bound = self.model.bind(&mut g);
            let img_node = g.leaf(batch.images, false);
            let out = self.model.forward_segmentor(&mut g, &bound, img_node)?;
            let terms = self.model.seg_loss(&mut g, &out, &batch.masks, &batch.bds, &batch.sds)?;
            let (total, l_cl) = if joint {
                let logits = self.model.fuse_and_classify(&mut g, &bound, img_node, &out.pyr)?;
                let ce = g.cross_entropy(logits, &batch.labels);
                let weighted = g.scale(ce, cfg.lambda[0]);
                (g.add(terms.total, weighted), g.value(ce).item())
            } else {
                (terms.total, 0.0)
            };
            g.backward(total);
            self.model.step_group(&g, &bound, ParamGroup::Seg, &mut self.adam_seg);
            if joint {
                let adam = self.adam_cls.as_mut().expect("classifier present");
                self.model.step_group(&g, &bound, ParamGroup::Cls, adam);
            }

            let m = chunk.len() as f64;
            sums[0] += m * g.value(terms.total).item();
            sums[1] += m * g.value(terms.dice).item();
            sums[2] += m * terms.bd.map_or(0.0, |id| g.value(id).item());
            sums[3] += m * terms.sd.map_or(0.0, |id| g.value(id).item());
            sums[4] += m * l_cl;
            seen += chunk.len();
        }
        if seen == 0 {
            return Err(ModelError::DataEmpty);
        }
        let inv = 1.0 / seen as f64;
        let losses = EpochLosses {
            epoch,
            l_seg: sums[0] * inv,
            l_dice: sums[1] * inv,
            l_bd: sums[2] * inv,
            l_sd: sums[3] * inv,
            l_cl: sums[4] * inv,
            frozen,
        };
        self.completed = epoch;
        self.history.push(losses);
        Ok(losses)
    }

    /// Runs the configured number of epochs.
    pub fn run(&mut self) -> Result<(), ModelError> {
        while self.completed < self.model.cfg.epochs {
            self.run_epoch()?;
        }
        Ok(())
    }

    pub fn history_csv(&self) -> String {
        history_csv(&self.history)
    }
}

pub fn history_csv(history: &[EpochLosses]) -> String {
    let mut out = String::from("epoch,l_seg,l_dice,l_bd,l_sd,l_cl,frozen\n");
    for h in history {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{}\n",
            h.epoch,
            h.l_seg,
            h.l_dice,
            h.l_bd,
            h.l_sd,
            h.l_cl,
            u8::from(h.frozen)
        ));
    }
    out
}
