//! Shared-encoder network with three decoder branches (region, boundary,
//! distance) and a classifier fed by reduced multi-scale decoder features.
//!
//! Channel bookkeeping, with encoder widths w1..w4 and decoder widths
//! d1..d4 (d1 = decoder_width, halving per stage):
//!   stem 1 -> w1 at full res; encoder stage k doubles depth and pools;
//!   bottleneck w4 at 1/16.
//!   decoder stage k upsamples, concatenates the matching encoder skip,
//!   then two 3x3 conv-BN-ReLU to d_k.
//!   The region decoder's last stage additionally takes the boundary
//!   decoder's penultimate features: its input becomes 2*d3 + w1 channels
//!   instead of d3 + w1.
//!   classifier stage k consumes the three branches' stage outputs at the
//!   matching resolution, reduced by a 1x1 conv to w_k/2 channels, then
//!   concatenated with the classifier's own features.

use crate::adam::AdamState;
use crate::graph::{Graph, GraphError, NodeId};
use crate::tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("resolution mismatch: {0}")]
    ResolutionMismatch(String),
    #[error("classifier is ablated in this model")]
    ClassifierAblated,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("no usable samples")]
    DataEmpty,
    #[error("target computation failed: {0}")]
    Target(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BsdaConfig {
    pub image_size: usize,
    /// Encoder and classifier stage widths.
    pub widths: [usize; 4],
    /// First decoder stage width; halves at every later stage.
    pub decoder_width: usize,
    /// lambda[0] weighs the classification term of the joint loss;
    /// lambda[1..=3] weigh dice, boundary-mse and distance-mse.
    pub lambda: [f64; 4],
    /// Boundary heatmap spread in pixels.
    pub sigma: f64,
    /// Last epoch (1-based, inclusive) with the classifier frozen.
    pub tau: usize,
    pub epochs: usize,
    pub lr_seg: f64,
    pub lr_cls: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub augment: bool,
}

impl Default for BsdaConfig {
    fn default() -> Self {
        BsdaConfig {
            image_size: 64,
            widths: [8, 16, 32, 64],
            decoder_width: 32,
            lambda: [1.0, 3.0, 1.0, 1.0],
            sigma: 2.0,
            tau: 20,
            epochs: 200,
            lr_seg: 1e-4,
            lr_cls: 2e-5,
            batch_size: 8,
            seed: 0,
            augment: true,
        }
    }
}

impl BsdaConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |m: String| Err(ModelError::ConfigInvalid(m));
        if self.image_size < 16 || self.image_size % 16 != 0 {
            return fail(format!(
                "image_size {} must be a positive multiple of 16 (four pooling stages)",
                self.image_size
            ));
        }
        for (i, &w) in self.widths.iter().enumerate() {
            if w == 0 || w % 2 != 0 {
                return fail(format!(
                    "widths[{i}] = {w} must be positive and even (fusion reducers use half-width)"
                ));
            }
        }
        if self.decoder_width == 0 || self.decoder_width % 8 != 0 {
            return fail(format!(
                "decoder_width {} must be a positive multiple of 8 so halving stays integral",
                self.decoder_width
            ));
        }
        if self.lambda.iter().any(|&l| !(l >= 0.0)) {
            return fail(format!("lambdas {:?} must all be >= 0", self.lambda));
        }
        if !(self.sigma > 0.0) {
            return fail(format!("sigma {} must be > 0", self.sigma));
        }
        if self.tau >= self.epochs {
            return fail(format!(
                "tau {} must be < epochs {} or the classifier never trains",
                self.tau, self.epochs
            ));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1".into());
        }
        if !(self.lr_seg > 0.0) || !(self.lr_cls > 0.0) {
            return fail(format!("learning rates ({}, {}) must be > 0", self.lr_seg, self.lr_cls));
        }
        Ok(())
    }

    pub fn decoder_widths(&self) -> [usize; 4] {
        let d = self.decoder_width;
        [d, d / 2, d / 4, d / 8]
    }
}

/// Which parts of the network are disabled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Ablation {
    pub no_b: bool,
    pub no_d: bool,
    pub no_cls: bool,
}

impl Ablation {
    pub const FULL: Ablation = Ablation { no_b: false, no_d: false, no_cls: false };

    pub fn single_task() -> Ablation {
        Ablation { no_b: true, no_d: true, no_cls: true }
    }

    /// Parses comma-separated flags: no-b, no-d, no-cls, single-task.
    pub fn parse(spec: &str) -> Result<Ablation, String> {
        let mut a = Ablation::default();
        for tok in spec.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match tok {
                "no-b" => a.no_b = true,
                "no-d" => a.no_d = true,
                "no-cls" => a.no_cls = true,
                "single-task" => a = Ablation::single_task(),
                other => return Err(format!("unknown ablation flag '{other}'")),
            }
        }
        Ok(a)
    }

    pub fn label(&self) -> String {
        if *self == Ablation::single_task() {
            return "single-task".into();
        }
        let mut parts = Vec::new();
        if self.no_b {
            parts.push("no-b");
        }
        if self.no_d {
            parts.push("no-d");
        }
        if self.no_cls {
            parts.push("no-cls");
        }
        if parts.is_empty() {
            "full".into()
        } else {
            parts.join(",")
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Seg,
    Cls,
}

/// One conv + batchnorm + relu block. Indices point into the model's
/// parameter and batchnorm-buffer tables.
#[derive(Debug, Clone, Copy)]
struct Cbr {
    w: usize,
    b: usize,
    gamma: usize,
    beta: usize,
    bn: usize,
}

#[derive(Debug, Clone, Copy)]
struct DecStage {
    c1: Cbr,
    c2: Cbr,
}

#[derive(Debug, Clone)]
struct Decoder {
    stages: [DecStage; 4],
    head_w: usize,
    head_b: usize,
}

#[derive(Debug, Clone)]
struct ClsStage {
    reducer: Cbr,
    c1: Cbr,
    c2: Cbr,
}

#[derive(Debug, Clone)]
struct Arch {
    stem: Cbr,
    enc: [DecStage; 4],
    dec_s: Decoder,
    dec_b: Option<Decoder>,
    dec_d: Option<Decoder>,
    cls: Option<([ClsStage; 4], usize, usize)>,
}

/// Running batchnorm statistics plus identification for checkpoints.
#[derive(Debug, Clone)]
pub struct BnBuffer {
    pub name: String,
    pub group: ParamGroup,
    pub running: crate::graph::BnRunning,
}

pub struct BsdaModel {
    pub cfg: BsdaConfig,
    pub ablate: Ablation,
    pub n_classes: usize,
    params: Vec<Tensor>,
    names: Vec<String>,
    groups: Vec<ParamGroup>,
    bn: Vec<BnBuffer>,
    arch: Arch,
}

/// Leaf bindings for one forward pass: `ids[i]` is the graph node holding
/// parameter `i`.
pub struct Bound {
    ids: Vec<NodeId>,
}

impl Bound {
    /// Graph leaves in parameter order, parallel to `param_names`.
    pub fn param_nodes(&self) -> &[NodeId] {
        &self.ids
    }
}

/// Per-branch stage outputs at resolutions 1/8, 1/4, 1/2, 1/1 of the
/// input, in that order.
pub struct Pyramids {
    pub s: Vec<NodeId>,
    pub b: Option<Vec<NodeId>>,
    pub d: Option<Vec<NodeId>>,
}

pub struct SegOut {
    pub p_s: NodeId,
    pub p_b: Option<NodeId>,
    pub p_d: Option<NodeId>,
    pub pyr: Pyramids,
}

pub struct SegLossTerms {
    pub total: NodeId,
    pub dice: NodeId,
    pub bd: Option<NodeId>,
    pub sd: Option<NodeId>,
}

struct Bank {
    params: Vec<Tensor>,
    names: Vec<String>,
    groups: Vec<ParamGroup>,
    bn: Vec<BnBuffer>,
    rng: ChaCha8Rng,
}

impl Bank {
    fn tensor(&mut self, name: &str, group: ParamGroup, t: Tensor) -> usize {
        self.params.push(t);
        self.names.push(name.to_string());
        self.groups.push(group);
        self.params.len() - 1
    }

    fn he_normal(&mut self, shape: Vec<usize>, fan_in: usize) -> Tensor {
        let std = (2.0 / fan_in as f64).sqrt();
        let dist = Normal::new(0.0, std).expect("valid normal");
        let n: usize = shape.iter().product();
        let data: Vec<f64> = (0..n).map(|_| dist.sample(&mut self.rng)).collect();
        Tensor::new(shape, data).expect("init shape")
    }

    fn conv(&mut self, name: &str, group: ParamGroup, co: usize, ci: usize, k: usize) -> (usize, usize) {
        let w = self.he_normal(vec![co, ci, k, k], ci * k * k);
        let wi = self.tensor(&format!("{name}.w"), group, w);
        let bi = self.tensor(&format!("{name}.b"), group, Tensor::zeros(&[co]));
        (wi, bi)
    }

    fn cbr(&mut self, name: &str, group: ParamGroup, ci: usize, co: usize, k: usize) -> Cbr {
        let (w, b) = self.conv(&format!("{name}.conv"), group, co, ci, k);
        let gamma = self.tensor(&format!("{name}.bn.g"), group, Tensor::full(&[co], 1.0));
        let beta = self.tensor(&format!("{name}.bn.b"), group, Tensor::zeros(&[co]));
        self.bn.push(BnBuffer {
            name: format!("{name}.bn"),
            group,
            running: crate::graph::BnRunning::new(co),
        });
        Cbr { w, b, gamma, beta, bn: self.bn.len() - 1 }
    }

    fn decoder(&mut self, name: &str, cfg: &BsdaConfig, couple_b: bool) -> Decoder {
        let w = cfg.widths;
        let dw = cfg.decoder_widths();
        // Stage inputs: up(prev) concat encoder skip; stage 4 of the region
        // decoder also carries the boundary decoder's penultimate features.
        let in1 = w[3] + w[3];
        let in2 = dw[0] + w[2];
        let in3 = dw[1] + w[1];
        let in4 = if couple_b { 2 * dw[2] + w[0] } else { dw[2] + w[0] };
        let ins = [in1, in2, in3, in4];
        let mut stages = Vec::with_capacity(4);
        for (k, &ci) in ins.iter().enumerate() {
            let co = dw[k];
            let c1 = self.cbr(&format!("{name}.{}.c1", k + 1), ParamGroup::Seg, ci, co, 3);
            let c2 = self.cbr(&format!("{name}.{}.c2", k + 1), ParamGroup::Seg, co, co, 3);
            stages.push(DecStage { c1, c2 });
        }
        let (head_w, head_b) = self.conv(&format!("{name}.head"), ParamGroup::Seg, 1, dw[3], 1);
        Decoder { stages: [stages[0], stages[1], stages[2], stages[3]], head_w, head_b }
    }
}

impl BsdaModel {
    pub fn new(cfg: BsdaConfig, n_classes: usize, ablate: Ablation) -> Result<BsdaModel, ModelError> {
        cfg.validate()?;
        if n_classes < 2 {
            return Err(ModelError::ConfigInvalid(format!("n_classes {n_classes} must be >= 2")));
        }
        let mut bank = Bank {
            params: Vec::new(),
            names: Vec::new(),
            groups: Vec::new(),
            bn: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        };
        let w = cfg.widths;
        let dw = cfg.decoder_widths();

        let stem = bank.cbr("stem", ParamGroup::Seg, 1, w[0], 3);
        let mut enc = Vec::with_capacity(4);
        let enc_ins = [w[0], w[0], w[1], w[2]];
        for k in 0..4 {
            let c1 = bank.cbr(&format!("enc{}.c1", k + 1), ParamGroup::Seg, enc_ins[k], w[k], 3);
            let c2 = bank.cbr(&format!("enc{}.c2", k + 1), ParamGroup::Seg, w[k], w[k], 3);
            enc.push(DecStage { c1, c2 });
        }

        let has_b = !ablate.no_b;
        let dec_s = bank.decoder("dec_s", &cfg, has_b);
        let dec_b = has_b.then(|| bank.decoder("dec_b", &cfg, false));
        let dec_d = (!ablate.no_d).then(|| bank.decoder("dec_d", &cfg, false));

        let cls = if ablate.no_cls {
            None
        } else {
            let n_br = 1 + usize::from(has_b) + usize::from(!ablate.no_d);
            // Classifier stage k runs at the resolution of decoder stage
            // 5-k; its fusion input is that stage's concatenated branches.
            let mut stages = Vec::with_capacity(4);
            let mut prev = 1; // raw image channels
            for k in 0..4 {
                let fused_in = n_br * dw[3 - k];
                let red = w[k] / 2;
                let reducer =
                    bank.cbr(&format!("cls{}.red", k + 1), ParamGroup::Cls, fused_in, red, 1);
                let c1 = bank.cbr(&format!("cls{}.c1", k + 1), ParamGroup::Cls, prev + red, w[k], 3);
                let c2 = bank.cbr(&format!("cls{}.c2", k + 1), ParamGroup::Cls, w[k], w[k], 3);
                stages.push(ClsStage { reducer, c1, c2 });
                prev = w[k];
            }
            let fc_w = bank.he_normal(vec![n_classes, w[3]], w[3]);
            let fc_wi = bank.tensor("cls.fc.w", ParamGroup::Cls, fc_w);
            let fc_bi = bank.tensor("cls.fc.b", ParamGroup::Cls, Tensor::zeros(&[n_classes]));
            Some(([stages[0].clone(), stages[1].clone(), stages[2].clone(), stages[3].clone()], fc_wi, fc_bi))
        };

        Ok(BsdaModel {
            cfg,
            ablate,
            n_classes,
            params: bank.params,
            names: bank.names,
            groups: bank.groups,
            bn: bank.bn,
            arch: Arch { stem, enc: [enc[0], enc[1], enc[2], enc[3]], dec_s, dec_b, dec_d, cls },
        })
    }

    pub fn has_classifier(&self) -> bool {
        self.arch.cls.is_some()
    }

    /// Registers every parameter as a graph leaf; returns the bindings used
    /// by the forward passes.
    pub fn bind(&self, g: &mut Graph) -> Bound {
        let ids = self.params.iter().map(|t| g.leaf(t.clone(), true)).collect();
        Bound { ids }
    }

    fn cbr_fwd(&mut self, g: &mut Graph, bd: &Bound, l: Cbr, x: NodeId) -> Result<NodeId, ModelError> {
        let k = self.params[l.w].shape()[2];
        let y = g.conv2d(x, bd.ids[l.w], bd.ids[l.b], (k - 1) / 2);
        let y = g.batchnorm2d(
            y,
            bd.ids[l.gamma],
            bd.ids[l.beta],
            &mut self.bn[l.bn].running,
            0.1,
            1e-5,
        )?;
        Ok(g.relu(y))
    }

    fn stage_fwd(&mut self, g: &mut Graph, bd: &Bound, st: DecStage, x: NodeId) -> Result<NodeId, ModelError> {
        let y = self.cbr_fwd(g, bd, st.c1, x)?;
        self.cbr_fwd(g, bd, st.c2, y)
    }

    fn decoder_fwd(
        &mut self,
        g: &mut Graph,
        bd: &Bound,
        which: DecoderKind,
        bott: NodeId,
        skips: &[NodeId; 4],
        b_penult: Option<NodeId>,
    ) -> Result<(NodeId, Vec<NodeId>), ModelError> {
        let dec = match which {
            DecoderKind::S => self.arch.dec_s.clone(),
            DecoderKind::B => self.arch.dec_b.clone().expect("branch present"),
            DecoderKind::D => self.arch.dec_d.clone().expect("branch present"),
        };
        let mut outs = Vec::with_capacity(4);
        let mut x = bott;
        for k in 0..4 {
            if k == 3 {
                if let Some(pb) = b_penult {
                    x = g.concat_c(&[x, pb]);
                }
            }
            let up = g.upsample2x(x);
            let cat = g.concat_c(&[up, skips[3 - k]]);
            x = self.stage_fwd(g, bd, dec.stages[k], cat)?;
            outs.push(x);
        }
        let head = g.conv2d(x, bd.ids[dec.head_w], bd.ids[dec.head_b], 0);
        Ok((head, outs))
    }

    /// Runs encoder and all present decoders. Returns full-resolution
    /// region logits, boundary and distance regressions, and each branch's
    /// stage outputs for fusion.
    pub fn forward_segmentor(
        &mut self,
        g: &mut Graph,
        bd: &Bound,
        images: NodeId,
    ) -> Result<SegOut, ModelError> {
        let shp = g.value(images).shape().to_vec();
        let s = self.cfg.image_size;
        if shp.len() != 4 || shp[1] != 1 || shp[2] != s || shp[3] != s {
            return Err(ModelError::ShapeMismatch(format!(
                "images must be (n, 1, {s}, {s}), got {shp:?}"
            )));
        }

        let mut x = self.cbr_fwd(g, bd, self.arch.stem, images)?;
        let mut skips = [x; 4];
        for k in 0..4 {
            x = self.stage_fwd(g, bd, self.arch.enc[k], x)?;
            skips[k] = x;
            x = g.maxpool2x(x);
        }
        let bott = x;

        let (p_b, pyr_b) = if self.arch.dec_b.is_some() {
            let (p, pyr) = self.decoder_fwd(g, bd, DecoderKind::B, bott, &skips, None)?;
            (Some(p), Some(pyr))
        } else {
            (None, None)
        };
        let b_penult = pyr_b.as_ref().map(|p| p[2]);
        let (p_s, pyr_s) = self.decoder_fwd(g, bd, DecoderKind::S, bott, &skips, b_penult)?;
        let (p_d, pyr_d) = if self.arch.dec_d.is_some() {
            let (p, pyr) = self.decoder_fwd(g, bd, DecoderKind::D, bott, &skips, None)?;
            (Some(p), Some(pyr))
        } else {
            (None, None)
        };

        Ok(SegOut { p_s, p_b, p_d, pyr: Pyramids { s: pyr_s, b: pyr_b, d: pyr_d } })
    }

    /// Weighted multi-task objective: lambda1 * dice(region) +
    /// lambda2 * mse(boundary) + lambda3 * mse(distance). Ablated branches
    /// contribute nothing.
    pub fn seg_loss(
        &self,
        g: &mut Graph,
        out: &SegOut,
        masks: &Tensor,
        bd_target: &Tensor,
        sd_target: &Tensor,
    ) -> Result<SegLossTerms, ModelError> {
        let [_, l1, l2, l3] = self.cfg.lambda;
        let dice = g.dice_loss(out.p_s, masks);
        let mut total = g.scale(dice, l1);
        let bd = match out.p_b {
            Some(p) => {
                let m = g.mse_loss(p, bd_target);
                let t = g.scale(m, l2);
                total = g.add(total, t);
                Some(m)
            }
            None => None,
        };
        let sd = match out.p_d {
            Some(p) => {
                let m = g.mse_loss(p, sd_target);
                let t = g.scale(m, l3);
                total = g.add(total, t);
                Some(m)
            }
            None => None,
        };
        Ok(SegLossTerms { total, dice, bd, sd })
    }

    /// Classifier over the raw image plus reduced decoder features at each
    /// resolution. `pyr` normally comes from `forward_segmentor`, but any
    /// nodes with matching shapes are accepted (ablation experiments feed
    /// zeros here).
    pub fn fuse_and_classify(
        &mut self,
        g: &mut Graph,
        bd: &Bound,
        images: NodeId,
        pyr: &Pyramids,
    ) -> Result<NodeId, ModelError> {
        let (stages, fc_w, fc_b) = match &self.arch.cls {
            Some(c) => (c.0.clone(), c.1, c.2),
            None => return Err(ModelError::ClassifierAblated),
        };
        let n = g.value(images).shape()[0];
        let s = self.cfg.image_size;
        let mut x = images;
        for k in 0..4 {
            // Decoder stage outputs are ordered coarse-to-fine; classifier
            // stage k wants the one at its own input resolution.
            let di = 3 - k;
            let res = s >> k;
            let mut feats = vec![pyr.s[di]];
            if let Some(b) = &pyr.b {
                feats.push(b[di]);
            }
            if let Some(d) = &pyr.d {
                feats.push(d[di]);
            }
            for &f in &feats {
                let fs = g.value(f).shape();
                if fs[0] != n || fs[2] != res || fs[3] != res {
                    return Err(ModelError::ResolutionMismatch(format!(
                        "classifier stage {} expects (n, c, {res}, {res}) features, got {fs:?}",
                        k + 1
                    )));
                }
            }
            let fused = if feats.len() == 1 { feats[0] } else { g.concat_c(&feats) };
            let red = self.cbr_fwd(g, bd, stages[k].reducer, fused)?;
            let cat = g.concat_c(&[x, red]);
            let y = self.cbr_fwd(g, bd, stages[k].c1, cat)?;
            let y = self.cbr_fwd(g, bd, stages[k].c2, y)?;
            x = g.maxpool2x(y);
        }
        let pooled = g.global_avg_pool(x);
        Ok(g.linear(pooled, bd.ids[fc_w], bd.ids[fc_b]))
    }

    /// One optimizer step over the given group's parameters using the
    /// gradients recorded in `g`. Parameters without gradients are skipped.
    pub fn step_group(&mut self, g: &Graph, bound: &Bound, group: ParamGroup, adam: &mut AdamState) {
        let mut prefs: Vec<&mut [f64]> = Vec::new();
        let mut grads: Vec<Option<&[f64]>> = Vec::new();
        for (i, t) in self.params.iter_mut().enumerate() {
            if self.groups[i] == group {
                prefs.push(t.data_mut());
                grads.push(g.grad(bound.ids[i]));
            }
        }
        adam.step(&mut prefs, &grads);
    }

    /// Tensor element counts for the group, in the fixed parameter order;
    /// sizes an `AdamState` for `step_group`.
    pub fn group_sizes(&self, group: ParamGroup) -> Vec<usize> {
        self.params
            .iter()
            .zip(&self.groups)
            .filter(|(_, g)| **g == group)
            .map(|(t, _)| t.len())
            .collect()
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.params[i])
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &mut self.params[i])
    }

    pub fn params_with_names(&self) -> impl Iterator<Item = (&str, &Tensor, ParamGroup)> {
        self.names
            .iter()
            .zip(&self.params)
            .zip(&self.groups)
            .map(|((n, t), g)| (n.as_str(), t, *g))
    }

    pub fn bn_buffers(&self) -> &[BnBuffer] {
        &self.bn
    }

    pub fn bn_buffers_mut(&mut self) -> &mut [BnBuffer] {
        &mut self.bn
    }

    pub fn set_param(&mut self, name: &str, t: Tensor) -> Result<(), ModelError> {
        let i = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| ModelError::Checkpoint(format!("unknown parameter '{name}'")))?;
        if self.params[i].shape() != t.shape() {
            return Err(ModelError::ShapeMismatch(format!(
                "parameter '{name}': expected {:?}, got {:?}",
                self.params[i].shape(),
                t.shape()
            )));
        }
        self.params[i] = t;
        Ok(())
    }

    /// FNV-1a over the raw bytes of every parameter and batchnorm buffer in
    /// the group; detects any drift bit-for-bit.
    pub fn group_checksum(&self, group: ParamGroup) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |v: f64| {
            for byte in v.to_le_bytes() {
                h ^= byte as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        for (t, g) in self.params.iter().zip(&self.groups) {
            if *g == group {
                t.data().iter().copied().for_each(&mut eat);
            }
        }
        for b in &self.bn {
            if b.group == group {
                b.running.mean.iter().copied().for_each(&mut eat);
                b.running.var.iter().copied().for_each(&mut eat);
            }
        }
        h
    }
}

#[derive(Clone, Copy)]
enum DecoderKind {
    S,
    B,
    D,
}
