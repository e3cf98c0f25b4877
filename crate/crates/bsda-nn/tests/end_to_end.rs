//! Whole-network checks: analytic gradients of the joint objective against
//! central finite differences, and a short training run on generated shapes.

use bsda_core::dataset::{LoadedSample, Split};
use bsda_core::synth::{gen_sample, SHAPE_CLASSES};
use bsda_nn::model::{Ablation, BsdaConfig, BsdaModel};
use bsda_nn::train::{prepare_samples, Trainer};
use bsda_nn::{Graph, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny_cfg(image_size: usize) -> BsdaConfig {
    BsdaConfig {
        image_size,
        widths: [2, 4, 4, 4],
        decoder_width: 8,
        batch_size: 2,
        tau: 2,
        epochs: 6,
        seed: 11,
        ..BsdaConfig::default()
    }
}

/// Joint objective (all three decoders plus the classifier) checked against
/// central finite differences at a handful of coordinates in every
/// parameter tensor. Batch statistics make this the hardest case: each
/// probe re-runs the full train-mode forward pass.
#[test]
fn joint_loss_gradients_match_finite_differences() {
    let cfg = tiny_cfg(16);
    let lambda0 = cfg.lambda[0];
    let side = cfg.image_size;
    let n = 2usize;
    let mut model = BsdaModel::new(cfg, 3, Ablation::FULL).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let px = n * side * side;
    let images = Tensor::new(
        vec![n, 1, side, side],
        (0..px).map(|_| rng.random_range(0.0..1.0)).collect(),
    )
    .unwrap();
    let masks = Tensor::new(
        vec![n, 1, side, side],
        (0..px).map(|_| f64::from(rng.random_bool(0.4))).collect(),
    )
    .unwrap();
    let bd = Tensor::new(
        vec![n, 1, side, side],
        (0..px).map(|_| rng.random_range(0.0..1.0)).collect(),
    )
    .unwrap();
    let sd = Tensor::new(
        vec![n, 1, side, side],
        (0..px).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap();
    let labels = vec![0usize, 2];

    let names: Vec<String> = model.param_names().to_vec();
    let shapes: Vec<Vec<usize>> = names
        .iter()
        .map(|nm| model.param(nm).unwrap().shape().to_vec())
        .collect();
    let theta: Vec<Vec<f64>> = names
        .iter()
        .map(|nm| model.param(nm).unwrap().data().to_vec())
        .collect();

    // Analytic pass.
    let analytic: Vec<Vec<f64>> = {
        let mut g = Graph::new(true);
        let bound = model.bind(&mut g);
        let imgs = g.leaf(images.clone(), false);
        let out = model.forward_segmentor(&mut g, &bound, imgs).unwrap();
        let seg = model.seg_loss(&mut g, &out, &masks, &bd, &sd).unwrap();
        let logits = model.fuse_and_classify(&mut g, &bound, imgs, &out.pyr).unwrap();
        let ce = g.cross_entropy(logits, &labels);
        let ce = g.scale(ce, lambda0);
        let total = g.add(seg.total, ce);
        g.backward(total);
        bound
            .param_nodes()
            .iter()
            .zip(&names)
            .map(|(&id, nm)| {
                g.grad(id)
                    .unwrap_or_else(|| panic!("no gradient reached parameter {nm}"))
                    .to_vec()
            })
            .collect()
    };

    // A few spread-out coordinates per tensor keeps the probe count (and
    // with it the number of full forward passes) manageable.
    let mut coords = Vec::new();
    for (ti, t) in theta.iter().enumerate() {
        let len = t.len();
        let picks = len.min(4);
        let mut last = usize::MAX;
        for k in 0..picks {
            let ci = if picks == 1 { 0 } else { k * (len - 1) / (picks - 1) };
            if ci != last {
                coords.push((ti, ci));
                last = ci;
            }
        }
    }
    assert!(coords.len() >= 3 * names.len(), "probe set unexpectedly sparse");

    let mut loss = |probe: &[Vec<f64>]| -> f64 {
        for ((nm, shape), vals) in names.iter().zip(&shapes).zip(probe) {
            model
                .set_param(nm, Tensor::new(shape.clone(), vals.clone()).unwrap())
                .unwrap();
        }
        let mut g = Graph::new(true);
        let bound = model.bind(&mut g);
        let imgs = g.leaf(images.clone(), false);
        let out = model.forward_segmentor(&mut g, &bound, imgs).unwrap();
        let seg = model.seg_loss(&mut g, &out, &masks, &bd, &sd).unwrap();
        let logits = model.fuse_and_classify(&mut g, &bound, imgs, &out.pyr).unwrap();
        let ce = g.cross_entropy(logits, &labels);
        let ce = g.scale(ce, lambda0);
        let total = g.add(seg.total, ce);
        g.value(total).item()
    };

    // The objective is only piecewise smooth (relu, pooling argmax) and
    // batch normalization gives it steep curvature, so a fixed step cannot
    // settle every coordinate. Shrink the step until the quotient agrees;
    // a wiring bug stays wrong at every step size.
    let mut probe = theta.clone();
    let mut worst = (0.0f64, String::new(), 0usize);
    for &(ti, ci) in &coords {
        let orig = probe[ti][ci];
        let ad = analytic[ti][ci];
        let mut best = f64::INFINITY;
        for step in [1e-5, 1e-6, 1e-7] {
            let eps = step * orig.abs().max(1.0);
            probe[ti][ci] = orig + eps;
            let lp = loss(&probe);
            probe[ti][ci] = orig - eps;
            let lm = loss(&probe);
            probe[ti][ci] = orig;
            let fd = (lp - lm) / (2.0 * eps);
            best = best.min((fd - ad).abs() / fd.abs().max(ad.abs()).max(1e-4));
            if best < 1e-4 {
                break;
            }
        }
        if best > worst.0 {
            worst = (best, names[ti].clone(), ci);
        }
    }
    assert!(
        worst.0 < 1e-3,
        "worst relative gradient error {:.3e} at {}[{}] over {} probes",
        worst.0,
        worst.1,
        worst.2,
        coords.len()
    );
}

fn make_samples(image_size: usize, per_class: usize, seed: u64) -> Vec<LoadedSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (label, &class) in SHAPE_CLASSES.iter().enumerate() {
        for i in 0..per_class {
            let (image, mask) = gen_sample(class, image_size, 0.25, &mut rng).unwrap();
            out.push(LoadedSample {
                id: format!("{}_{i:03}", class.as_str()),
                label,
                split: Split::Train,
                image,
                mask,
            });
        }
    }
    out
}

#[test]
fn training_reduces_segmentation_loss_on_generated_shapes() {
    let cfg = BsdaConfig {
        image_size: 48,
        widths: [2, 4, 4, 4],
        decoder_width: 8,
        batch_size: 4,
        tau: 3,
        epochs: 8,
        lr_seg: 3e-4,
        augment: false,
        seed: 7,
        ..BsdaConfig::default()
    };
    let sigma = cfg.sigma;
    let model = BsdaModel::new(cfg, SHAPE_CLASSES.len(), Ablation::FULL).unwrap();
    let samples = prepare_samples(&make_samples(48, 4, 31), sigma).unwrap();
    let mut trainer = Trainer::new(model, samples).unwrap();
    trainer.run().unwrap();

    let hist = trainer.history();
    assert_eq!(hist.len(), 8);
    for e in hist {
        assert!(e.l_seg.is_finite() && e.l_dice.is_finite());
        assert_eq!(e.frozen, e.epoch <= 3);
        if e.frozen {
            assert_eq!(e.l_cl, 0.0);
        }
    }
    let first = hist[0].l_seg;
    let last = hist[7].l_seg;
    assert!(
        last < first,
        "segmentation loss should fall over training: first {first:.4}, last {last:.4}"
    );
    // The per-term components should also not blow up past joint unfreezing.
    assert!(hist[7].l_cl.is_finite() && hist[7].l_cl > 0.0);
}

/// Tie-breaking check: a dropped classifier means the segmentation loss is
/// the only objective and training must still work end to end.
#[test]
fn single_task_training_runs_without_classifier() {
    let cfg = BsdaConfig {
        image_size: 48,
        widths: [2, 4, 4, 4],
        decoder_width: 8,
        batch_size: 4,
        tau: 1,
        epochs: 3,
        augment: false,
        seed: 9,
        ..BsdaConfig::default()
    };
    let sigma = cfg.sigma;
    let model = BsdaModel::new(cfg, SHAPE_CLASSES.len(), Ablation::single_task()).unwrap();
    let samples = prepare_samples(&make_samples(48, 3, 55), sigma).unwrap();
    let mut trainer = Trainer::new(model, samples).unwrap();
    trainer.run().unwrap();
    for e in trainer.history() {
        assert_eq!(e.l_cl, 0.0);
        assert_eq!(e.l_bd, 0.0);
        assert_eq!(e.l_sd, 0.0);
        assert!(e.l_seg.is_finite());
    }
}
