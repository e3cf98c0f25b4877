//! Central finite-difference verification of every graph op.
//!
//! Each check rebuilds a small graph from a flat parameter list, compares
//! analytic leaf gradients against (f(x+h) - f(x-h)) / 2h coordinate by
//! coordinate, and reports the worst relative error over >= 10 seeds.

use crate::graph::{BnRunning, Graph, NodeId};
use crate::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_TOL: f64 = 1e-4;
pub const BN_TOL: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct GradCheckResult {
    pub op: String,
    pub max_rel_err: f64,
    pub threshold: f64,
    pub seeds: usize,
}

impl GradCheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.threshold
    }
}

/// Worst relative error between analytic gradients and central differences
/// at the given (tensor, coordinate) pairs. `loss` must be a pure function
/// of `theta`.
pub fn max_rel_err(
    mut loss: impl FnMut(&[Vec<f64>]) -> f64,
    analytic: &[Vec<f64>],
    theta: &[Vec<f64>],
    coords: &[(usize, usize)],
) -> f64 {
    let mut probe: Vec<Vec<f64>> = theta.to_vec();
    let mut worst: f64 = 0.0;
    for &(ti, ci) in coords {
        let orig = probe[ti][ci];
        let eps = 1e-5 * orig.abs().max(1.0);
        probe[ti][ci] = orig + eps;
        let hi = loss(&probe);
        probe[ti][ci] = orig - eps;
        let lo = loss(&probe);
        probe[ti][ci] = orig;
        let fd = (hi - lo) / (2.0 * eps);
        let ad = analytic[ti][ci];
        let rel = (fd - ad).abs() / fd.abs().max(ad.abs()).max(1e-4);
        worst = worst.max(rel);
    }
    worst
}

fn all_coords(theta: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (ti, t) in theta.iter().enumerate() {
        for ci in 0..t.len() {
            out.push((ti, ci));
        }
    }
    out
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Uniform values kept away from zero so relu kinks sit outside the finite
/// difference step.
fn away_from_zero(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let v: f64 = rng.random_range(-1.0f64..1.0);
            v.signum() * (0.05 + v.abs())
        })
        .collect()
}

/// One op check: `build` maps the parameter list to (graph, loss node).
/// Returns the max relative error over all coordinates.
fn check_op(
    theta: &[Vec<f64>],
    build: impl Fn(&[Vec<f64>], &mut Graph) -> (Vec<NodeId>, NodeId),
    corrupt: bool,
) -> f64 {
    let mut g = Graph::new(true);
    let (leaves, loss) = build(theta, &mut g);
    g.backward(loss);
    let mut analytic: Vec<Vec<f64>> = leaves
        .iter()
        .map(|&id| g.grad(id).map(|s| s.to_vec()).unwrap_or_else(|| vec![0.0; g.value(id).len()]))
        .collect();
    if corrupt {
        // Deliberately wrong gradient; the harness must flag it.
        if let Some(v) = analytic.iter_mut().flat_map(|t| t.iter_mut()).next() {
            *v += 0.5;
        }
    }
    let loss_fn = |t: &[Vec<f64>]| {
        let mut g = Graph::new(true);
        let (_, l) = build(t, &mut g);
        g.value(l).item()
    };
    // Leaves map 1:1 onto a prefix of theta; anything after that prefix is
    // a constant (targets, labels) and is not probed.
    let coords = all_coords(&theta[..analytic.len()]);
    max_rel_err(loss_fn, &analytic, theta, &coords)
}

/// Scalarizes `y` so every element influences the loss with a distinct
/// weight: mse against a fixed pseudo-target built from the node id.
fn scalarize(g: &mut Graph, y: NodeId) -> NodeId {
    let shape = g.value(y).shape().to_vec();
    let n = g.value(y).len();
    let target: Vec<f64> = (0..n).map(|i| ((i * 7919 % 23) as f64) / 23.0 - 0.5).collect();
    let t = Tensor::new(shape, target).expect("target shape");
    g.mse_loss(y, &t)
}

type Builder = Box<dyn Fn(&[Vec<f64>], &mut Graph) -> (Vec<NodeId>, NodeId)>;

fn op_cases(rng: &mut ChaCha8Rng) -> Vec<(&'static str, f64, Vec<Vec<f64>>, Builder)> {
    let mut cases: Vec<(&'static str, f64, Vec<Vec<f64>>, Builder)> = Vec::new();

    // add
    let theta = vec![uniform(rng, 12, -1.0, 1.0), uniform(rng, 12, -1.0, 1.0)];
    cases.push((
        "add",
        DEFAULT_TOL,
        theta,
        Box::new(|t, g| {
            let a = g.leaf(Tensor::new(vec![3, 4], t[0].clone()).unwrap(), true);
            let b = g.leaf(Tensor::new(vec![3, 4], t[1].clone()).unwrap(), true);
            let y = g.add(a, b);
            let l = scalarize(g, y);
            (vec![a, b], l)
        }),
    ));

    // scale
    let theta = vec![uniform(rng, 10, -2.0, 2.0)];
    cases.push((
        "scale",
        DEFAULT_TOL,
        theta,
        Box::new(|t, g| {
            let x = g.leaf(Tensor::new(vec![10], t[0].clone()).unwrap(), true);
            let y = g.scale(x, -1.7);
            let l = scalarize(g, y);
            (vec![x], l)
        }),
    ));

    // relu (inputs kept off the kink)
    let theta = vec![away_from_zero(rng, 16)];
    cases.push((
        "relu",
        DEFAULT_TOL,
        theta,
        Box::new(|t, g| {
            let x = g.leaf(Tensor::new(vec![16], t[0].clone()).unwrap(), true);
            let y = g.relu(x);
            let l = scalarize(g, y);
            (vec![x], l)
        }),
    ));

    // sigmoid
    let theta = vec![uniform(rng, 16, -3.0, 3.0)];
    cases.push((
        "sigmoid",
        DEFAULT_TOL,
        theta,
        Box::new(|t, g| {
            let x = g.leaf(Tensor::new(vec![16], t[0].clone()).unwrap(), true);
            let y = g.sigmoid(x);
            let l = scalarize(g, y);
            (vec![x], l)
        }),
    ));

    // conv2d 3x3 pad 1
    let theta = vec![
        uniform(rng, 2 * 2 * 5 * 5, -1.0, 1.0),
        uniform(rng, 3 * 2 * 3 * 3, -0.7, 0.7),
        uniform(rng, 3, -0.3, 0.3),
    ];
    cases.push((
        "conv3x3",
        DEFAULT_TOL,
        theta,
        Box::new(|t, g| {
            let x = g.leaf(Tensor::new(vec![2, 2, 5, 5], t[0].clone()).unwrap(), true);
            let w = g.leaf(Tensor::new(vec![3, 2, 3, 3], t[1].clone()).unwrap(), true);
            let b = g.leaf(Tensor::new(vec![3], t[2].clone()).unwrap(), true);
            let y = g.conv2d(x, w, b, 1);
            let l = scalarize(g, y);
            (vec![x, w, b], l)
        }),
    ));

    // conv2d 1x1 pad 0
    let theta = vec![
        uniform(rng, 2 * 4 * 3 * 3, -1.0, 1.0),
        uniform(rng, 2 * 4 * 1 * 1, -0.7, 0.7),
        uniform(rng, 2, -0.3, 0.3),
    ];
    cases.push((
        "conv1x1",
        DEFAULT_TOL,
        theta,
        Box::new(|t, g| {
            let x = g.leaf(Tensor::new(vec![2, 4, 3, 3], t[0].clone()).unwrap(), true);
            let w = g.leaf(Tensor::new(vec![2, 4, 1, 1], t[1].clone()).unwrap(), true);
            let b = g.leaf(Tensor::new(vec![2], t[2].clone()).unwrap(), true);
            let y = g.conv2d(x, w, b, 0);
            let l = scalarize(g, y);
            (vec![x, w, b], l)
        }),
    ));

    // batchnorm (training mode, batch stats)
    let theta = vec![
        uniform(rng, 4 * 3 * 2 * 2, -2.0, 2.0),
        uniform(rng, 3, 0.5, 1.5),
        uniform(rng, 3, -0.5, 0.5),
    ];
    cases.push((
        "batchnorm",
        BN_TOL,
        theta,
        Box::new(|t, g| {
            let x = g.leaf(Tensor::new(vec![4, 3, 2, 2], t[0].clone()).unwrap(), true);
            let gamma = g.leaf(Tensor::new(vec![3], t[1].clone()).unwrap(), true);
            let beta = g.leaf(Tensor::new(vec![3], t[2].clone()).unwrap(), true);
            let mut running = BnRunning::new(3);
            let y = g.batchnorm2d(x, gamma, beta, &mut running, 0.1, 1e-5).unwrap();
            let l = scalarize(g, y);
            (vec![x, gamma, beta], l)
        }),
    ));

    // maxpool2x: distinct offsets within each 2x2 window keep a gap of at
    // least 0.21 between window cells, so the finite-difference step can
    // never flip the argmax.
    let mut pool_vals = uniform(rng, 1 * 2 * 4 * 4, -0.02, 0.02);
    for p in 0..2 {
        for oy in 0..2 {
            for ox in 0..2 {
                let mut offsets = [0.0, 0.25, 0.5, 0.75];
                for i in (1..4).rev() {
                    offsets.swap(i, rng.random_range(0..=i));
                }
                let base = p * 16 + oy * 2 * 4 + ox * 2;
                for (j, &cell) in [base, base + 1, base + 4, base + 5].iter().enumerate() {
                    pool_vals[cell] += offsets[j];
                }
            }
        }
    }
    cases.push((
        "maxpool2x",
        DEFAULT_TOL,
        vec![pool_vals],
        Box::new(|t, g| {
            let x = g.leaf(Tensor::new(vec![1, 2, 4, 4], t[0].clone()).unwrap(), true);
            let y = g.maxpool2x(x);
            let l = scalarize(g, y);
            (vec![x], l)
        }),
    ));

    // upsample2x
    let theta = vec![uniform(rng, 1 * 3 * 3 * 2, -1.0, 1.0)];
    cases.push((
        "upsample2x",
        DEFAULT_TOL,
        theta,
        Box::new(|t, g| {
            let x = g.leaf(Tensor::new(vec![1, 3, 3, 2], t[0].clone()).unwrap(), true);
            let y = g.upsample2x(x);
            let l = scalarize(g, y);
            (vec![x], l)
        }),
    ));

    // concat along channels
    let theta = vec![uniform(rng, 2 * 1 * 2 * 2, -1.0, 1.0), uniform(rng, 2 * 3 * 2 * 2, -1.0, 1.0)];
    cases.push((
        "concat",
        DEFAULT_TOL,
        theta,
        Box::new(|t, g| {
            let a = g.leaf(Tensor::new(vec![2, 1, 2, 2], t[0].clone()).unwrap(), true);
            let b = g.leaf(Tensor::new(vec![2, 3, 2, 2], t[1].clone()).unwrap(), true);
            let y = g.concat_c(&[a, b]);
            let l = scalarize(g, y);
            (vec![a, b], l)
        }),
    ));

    // global average pool
    let theta = vec![uniform(rng, 2 * 3 * 2 * 2, -1.0, 1.0)];
    cases.push((
        "global_avg_pool",
        DEFAULT_TOL,
        theta,
        Box::new(|t, g| {
            let x = g.leaf(Tensor::new(vec![2, 3, 2, 2], t[0].clone()).unwrap(), true);
            let y = g.global_avg_pool(x);
            let l = scalarize(g, y);
            (vec![x], l)
        }),
    ));

    // linear
    let theta = vec![
        uniform(rng, 3 * 5, -1.0, 1.0),
        uniform(rng, 4 * 5, -0.7, 0.7),
        uniform(rng, 4, -0.3, 0.3),
    ];
    cases.push((
        "linear",
        DEFAULT_TOL,
        theta,
        Box::new(|t, g| {
            let x = g.leaf(Tensor::new(vec![3, 5], t[0].clone()).unwrap(), true);
            let w = g.leaf(Tensor::new(vec![4, 5], t[1].clone()).unwrap(), true);
            let b = g.leaf(Tensor::new(vec![4], t[2].clone()).unwrap(), true);
            let y = g.linear(x, w, b);
            let l = scalarize(g, y);
            (vec![x, w, b], l)
        }),
    ));

    // dice loss (fused sigmoid)
    let target: Vec<f64> = (0..2 * 1 * 4 * 4).map(|_| f64::from(rng.random_bool(0.4))).collect();
    let theta = vec![uniform(rng, 2 * 1 * 4 * 4, -2.0, 2.0), target];
    cases.push((
        "dice_loss",
        DEFAULT_TOL,
        theta,
        Box::new(|t, g| {
            let z = g.leaf(Tensor::new(vec![2, 1, 4, 4], t[0].clone()).unwrap(), true);
            let target = Tensor::new(vec![2, 1, 4, 4], t[1].clone()).unwrap();
            let l = g.dice_loss(z, &target);
            (vec![z], l)
        }),
    ));

    // mse loss
    let target = uniform(rng, 2 * 1 * 3 * 3, -1.0, 1.0);
    let theta = vec![uniform(rng, 2 * 1 * 3 * 3, -1.0, 1.0), target];
    cases.push((
        "mse_loss",
        DEFAULT_TOL,
        theta,
        Box::new(|t, g| {
            let p = g.leaf(Tensor::new(vec![2, 1, 3, 3], t[0].clone()).unwrap(), true);
            let target = Tensor::new(vec![2, 1, 3, 3], t[1].clone()).unwrap();
            let l = g.mse_loss(p, &target);
            (vec![p], l)
        }),
    ));

    // cross entropy
    let theta = vec![uniform(rng, 4 * 3, -2.0, 2.0)];
    let labels: Vec<usize> = (0..4).map(|_| rng.random_range(0..3)).collect();
    cases.push((
        "cross_entropy",
        DEFAULT_TOL,
        theta,
        Box::new(move |t, g| {
            let z = g.leaf(Tensor::new(vec![4, 3], t[0].clone()).unwrap(), true);
            let l = g.cross_entropy(z, &labels);
            (vec![z], l)
        }),
    ));

    // Composed segmentation objective: a shared conv trunk feeding three
    // 1x1 heads, dice + weighted mse + weighted mse.
    let gt_mask: Vec<f64> = (0..2 * 1 * 4 * 4).map(|_| f64::from(rng.random_bool(0.5))).collect();
    let gt_bd = uniform(rng, 2 * 1 * 4 * 4, 0.0, 1.0);
    let gt_sd = uniform(rng, 2 * 1 * 4 * 4, -1.0, 1.0);
    let theta = vec![
        uniform(rng, 2 * 2 * 4 * 4, -1.0, 1.0),
        uniform(rng, 4 * 2 * 3 * 3, -0.5, 0.5),
        uniform(rng, 4, -0.2, 0.2),
        uniform(rng, 1 * 4 * 1 * 1, -0.7, 0.7),
        uniform(rng, 1, -0.2, 0.2),
        uniform(rng, 1 * 4 * 1 * 1, -0.7, 0.7),
        uniform(rng, 1, -0.2, 0.2),
        uniform(rng, 1 * 4 * 1 * 1, -0.7, 0.7),
        uniform(rng, 1, -0.2, 0.2),
        gt_mask,
        gt_bd,
        gt_sd,
    ];
    cases.push((
        "seg_objective",
        DEFAULT_TOL,
        theta,
        Box::new(|t, g| {
            let x = g.leaf(Tensor::new(vec![2, 2, 4, 4], t[0].clone()).unwrap(), true);
            let w = g.leaf(Tensor::new(vec![4, 2, 3, 3], t[1].clone()).unwrap(), true);
            let b = g.leaf(Tensor::new(vec![4], t[2].clone()).unwrap(), true);
            let trunk = g.conv2d(x, w, b, 1);
            let trunk = g.sigmoid(trunk);
            let mut heads = Vec::new();
            for i in 0..3 {
                let hw = g.leaf(Tensor::new(vec![1, 4, 1, 1], t[3 + 2 * i].clone()).unwrap(), true);
                let hb = g.leaf(Tensor::new(vec![1], t[4 + 2 * i].clone()).unwrap(), true);
                heads.push(g.conv2d(trunk, hw, hb, 0));
            }
            let gt_mask = Tensor::new(vec![2, 1, 4, 4], t[9].clone()).unwrap();
            let gt_bd = Tensor::new(vec![2, 1, 4, 4], t[10].clone()).unwrap();
            let gt_sd = Tensor::new(vec![2, 1, 4, 4], t[11].clone()).unwrap();
            let l_dice = g.dice_loss(heads[0], &gt_mask);
            let bd_prob = g.sigmoid(heads[1]);
            let l_bd = g.mse_loss(bd_prob, &gt_bd);
            let l_sd = g.mse_loss(heads[2], &gt_sd);
            let a = g.scale(l_dice, 1.0);
            let bsc = g.scale(l_bd, 3.0);
            let c = g.scale(l_sd, 1.0);
            let ab = g.add(a, bsc);
            let l = g.add(ab, c);
            (
                vec![x, w, b],
                l,
            )
        }),
    ));

    cases
}

/// Runs the whole op suite. `corrupt` names one op whose analytic gradient
/// is deliberately damaged before comparison, to prove the harness detects
/// bad gradients.
pub fn check_all_ops(base_seed: u64, seeds: usize, corrupt: Option<&str>) -> Vec<GradCheckResult> {
    assert!(seeds >= 1);
    // Collect op names from a throwaway pass so results exist even if a
    // case list changes.
    let names: Vec<(&'static str, f64)> = {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        op_cases(&mut rng).iter().map(|(n, tol, _, _)| (*n, *tol)).collect()
    };
    let mut worst = vec![0.0f64; names.len()];
    for step in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(step as u64));
        for (i, (name, _tol, theta, build)) in op_cases(&mut rng).into_iter().enumerate() {
            let c = corrupt == Some(name);
            let err = check_op(&theta, build, c);
            worst[i] = worst[i].max(err);
            let _ = name;
        }
    }
    names
        .into_iter()
        .zip(worst)
        .map(|((op, threshold), max_rel_err)| GradCheckResult {
            op: op.to_string(),
            max_rel_err,
            threshold,
            seeds,
        })
        .collect()
}
