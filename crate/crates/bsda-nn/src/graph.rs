//! Reverse-mode autodiff over a tape of tensor ops.
//!
//! A graph is built fresh for every step: leaves are pushed first, then ops
//! reference earlier nodes by id, so construction order is already a
//! topological order and backward is a single reverse sweep. Everything
//! that an op needs for its gradient (pooling argmax, batch statistics,
//! softmax rows) is captured at forward time.

use crate::kernels as k;
use crate::kernels::ConvDims;
use crate::tensor::Tensor;
use thiserror::Error;

pub type NodeId = usize;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("batch normalization in training mode needs batch >= 2, got {n}")]
    BatchTooSmall { n: usize },
}

/// Per-channel running statistics owned by the caller; training-mode
/// batchnorm updates them in place.
#[derive(Debug, Clone, PartialEq)]
pub struct BnRunning {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl BnRunning {
    pub fn new(channels: usize) -> Self {
        Self { mean: vec![0.0; channels], var: vec![1.0; channels] }
    }
}

enum Op {
    Leaf,
    Add { a: NodeId, b: NodeId },
    Scale { x: NodeId, factor: f64 },
    Relu { x: NodeId },
    Sigmoid { x: NodeId },
    Conv2d { x: NodeId, w: NodeId, b: NodeId, dims: ConvDims },
    BatchNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        mean: Vec<f64>,
        inv_std: Vec<f64>,
        batch_stats: bool,
        n: usize,
        c: usize,
        hw: usize,
    },
    MaxPool2x { x: NodeId, argmax: Vec<usize> },
    Upsample2x { x: NodeId, n: usize, c: usize, h: usize, w: usize },
    ConcatC { xs: Vec<NodeId>, n: usize, hw: usize },
    Gap { x: NodeId, n: usize, c: usize, hw: usize },
    Linear { x: NodeId, w: NodeId, b: NodeId },
    DiceLoss { logits: NodeId, target: Vec<f64>, probs: Vec<f64>, num: Vec<f64>, den: Vec<f64> },
    MseLoss { pred: NodeId, target: Vec<f64> },
    CrossEntropy { logits: NodeId, labels: Vec<usize>, probs: Vec<f64> },
}

struct Node {
    value: Tensor,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
    op: Op,
}

pub struct Graph {
    nodes: Vec<Node>,
    training: bool,
}

fn nchw(shape: &[usize]) -> (usize, usize, usize, usize) {
    assert_eq!(shape.len(), 4, "expected NCHW tensor, got shape {shape:?}");
    (shape[0], shape[1], shape[2], shape[3])
}

impl Graph {
    pub fn new(training: bool) -> Self {
        Self { nodes: Vec::new(), training }
    }

    pub fn training(&self) -> bool {
        self.training
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id].value
    }

    /// Gradient of the last backward() target with respect to node `id`.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.nodes[id].grad.as_deref()
    }

    fn push(&mut self, value: Tensor, requires_grad: bool, op: Op) -> NodeId {
        debug_assert!(
            value.data().iter().all(|v| v.is_finite()),
            "non-finite value out of op at node {}",
            self.nodes.len()
        );
        self.nodes.push(Node { value, grad: None, requires_grad, op });
        self.nodes.len() - 1
    }

    fn requires(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|&i| self.nodes[i].requires_grad)
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> NodeId {
        self.push(value, requires_grad, Op::Leaf)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.nodes[a].value.shape(), self.nodes[b].value.shape());
        let data: Vec<f64> = self.nodes[a]
            .value
            .data()
            .iter()
            .zip(self.nodes[b].value.data())
            .map(|(x, y)| x + y)
            .collect();
        let t = Tensor::new(self.nodes[a].value.shape().to_vec(), data).expect("same shape");
        let rg = self.requires(&[a, b]);
        self.push(t, rg, Op::Add { a, b })
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> NodeId {
        let data: Vec<f64> = self.nodes[x].value.data().iter().map(|v| v * factor).collect();
        let t = Tensor::new(self.nodes[x].value.shape().to_vec(), data).expect("same shape");
        let rg = self.requires(&[x]);
        self.push(t, rg, Op::Scale { x, factor })
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let data: Vec<f64> = self.nodes[x].value.data().iter().map(|v| v.max(0.0)).collect();
        let t = Tensor::new(self.nodes[x].value.shape().to_vec(), data).expect("same shape");
        let rg = self.requires(&[x]);
        self.push(t, rg, Op::Relu { x })
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let data: Vec<f64> =
            self.nodes[x].value.data().iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect();
        let t = Tensor::new(self.nodes[x].value.shape().to_vec(), data).expect("same shape");
        let rg = self.requires(&[x]);
        self.push(t, rg, Op::Sigmoid { x })
    }

    /// NCHW x OIHW convolution, stride 1. pad 1 keeps 3x3 outputs at input
    /// resolution; pad 0 is the 1x1 case.
    pub fn conv2d(&mut self, x: NodeId, w: NodeId, b: NodeId, pad: usize) -> NodeId {
        let (n, ci, h, ww) = nchw(self.nodes[x].value.shape());
        let ws = self.nodes[w].value.shape();
        assert_eq!(ws.len(), 4, "conv weight must be OIHW");
        assert_eq!(ws[1], ci, "conv weight in-channels mismatch");
        let dims = ConvDims { n, ci, h, w: ww, co: ws[0], kh: ws[2], kw: ws[3], pad };
        assert_eq!(self.nodes[b].value.len(), dims.co, "conv bias length");
        let mut cols = vec![0.0; dims.k() * dims.m()];
        let mut y = vec![0.0; n * dims.co * dims.m()];
        k::conv2d_forward(
            self.nodes[x].value.data(),
            self.nodes[w].value.data(),
            self.nodes[b].value.data(),
            &dims,
            &mut cols,
            &mut y,
        );
        let t = Tensor::new(vec![n, dims.co, dims.ho(), dims.wo()], y).expect("conv out shape");
        let rg = self.requires(&[x, w, b]);
        self.push(t, rg, Op::Conv2d { x, w, b, dims })
    }

    /// Batch normalization over NCHW. Training mode uses batch statistics
    /// (biased variance) and folds them into `running` with the given
    /// momentum; eval mode normalizes with `running` as constants.
    #[allow(clippy::too_many_arguments)]
    pub fn batchnorm2d(
        &mut self,
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        running: &mut BnRunning,
        momentum: f64,
        eps: f64,
    ) -> Result<NodeId, GraphError> {
        let (n, c, h, w) = nchw(self.nodes[x].value.shape());
        let hw = h * w;
        assert_eq!(self.nodes[gamma].value.len(), c);
        assert_eq!(self.nodes[beta].value.len(), c);
        assert_eq!(running.mean.len(), c);
        let (mean, inv_std, batch_stats) = if self.training {
            if n < 2 {
                return Err(GraphError::BatchTooSmall { n });
            }
            let (mean, var) = k::bn_batch_stats(self.nodes[x].value.data(), n, c, hw);
            for ch in 0..c {
                running.mean[ch] = (1.0 - momentum) * running.mean[ch] + momentum * mean[ch];
                running.var[ch] = (1.0 - momentum) * running.var[ch] + momentum * var[ch];
            }
            let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
            (mean, inv_std, true)
        } else {
            let inv_std: Vec<f64> = running.var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
            (running.mean.clone(), inv_std, false)
        };
        let mut y = vec![0.0; self.nodes[x].value.len()];
        k::bn_normalize(
            self.nodes[x].value.data(),
            &mean,
            &inv_std,
            self.nodes[gamma].value.data(),
            self.nodes[beta].value.data(),
            n,
            c,
            hw,
            &mut y,
        );
        let t = Tensor::new(vec![n, c, h, w], y).expect("bn same shape");
        let rg = self.requires(&[x, gamma, beta]);
        Ok(self.push(
            t,
            rg,
            Op::BatchNorm { x, gamma, beta, mean, inv_std, batch_stats, n, c, hw },
        ))
    }

    pub fn maxpool2x(&mut self, x: NodeId) -> NodeId {
        let (n, c, h, w) = nchw(self.nodes[x].value.shape());
        let mut y = vec![0.0; n * c * (h / 2) * (w / 2)];
        let mut argmax = vec![0usize; y.len()];
        k::maxpool2x_forward(self.nodes[x].value.data(), n, c, h, w, &mut y, &mut argmax);
        let t = Tensor::new(vec![n, c, h / 2, w / 2], y).expect("pool shape");
        let rg = self.requires(&[x]);
        self.push(t, rg, Op::MaxPool2x { x, argmax })
    }

    pub fn upsample2x(&mut self, x: NodeId) -> NodeId {
        let (n, c, h, w) = nchw(self.nodes[x].value.shape());
        let mut y = vec![0.0; n * c * 4 * h * w];
        k::upsample2x_forward(self.nodes[x].value.data(), n, c, h, w, &mut y);
        let t = Tensor::new(vec![n, c, 2 * h, 2 * w], y).expect("upsample shape");
        let rg = self.requires(&[x]);
        self.push(t, rg, Op::Upsample2x { x, n, c, h, w })
    }

    /// Concatenation along the channel axis.
    pub fn concat_c(&mut self, xs: &[NodeId]) -> NodeId {
        assert!(!xs.is_empty());
        let (n, _, h, w) = nchw(self.nodes[xs[0]].value.shape());
        let mut c_total = 0;
        for &id in xs {
            let (ni, ci, hi, wi) = nchw(self.nodes[id].value.shape());
            assert_eq!((ni, hi, wi), (n, h, w), "concat spatial/batch mismatch");
            c_total += ci;
        }
        let hw = h * w;
        let mut y = vec![0.0; n * c_total * hw];
        for i in 0..n {
            let mut at = 0;
            for &id in xs {
                let ci = self.nodes[id].value.shape()[1];
                let src = &self.nodes[id].value.data()[i * ci * hw..(i + 1) * ci * hw];
                y[(i * c_total + at) * hw..(i * c_total + at + ci) * hw].copy_from_slice(src);
                at += ci;
            }
        }
        let t = Tensor::new(vec![n, c_total, h, w], y).expect("concat shape");
        let rg = self.requires(xs);
        self.push(t, rg, Op::ConcatC { xs: xs.to_vec(), n, hw })
    }

    /// Global average pooling NCHW -> NC.
    pub fn global_avg_pool(&mut self, x: NodeId) -> NodeId {
        let (n, c, h, w) = nchw(self.nodes[x].value.shape());
        let hw = h * w;
        let data = self.nodes[x].value.data();
        let mut y = vec![0.0; n * c];
        for (p, out) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for &v in &data[p * hw..(p + 1) * hw] {
                s += v;
            }
            *out = s / hw as f64;
        }
        let t = Tensor::new(vec![n, c], y).expect("gap shape");
        let rg = self.requires(&[x]);
        self.push(t, rg, Op::Gap { x, n, c, hw })
    }

    /// `y[n, out] = x[n, f] . w[out, f] + b[out]`.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> NodeId {
        let xs = self.nodes[x].value.shape();
        let ws = self.nodes[w].value.shape();
        assert_eq!(xs.len(), 2);
        assert_eq!(ws.len(), 2);
        assert_eq!(ws[1], xs[1], "linear feature mismatch");
        let (n, f, out) = (xs[0], xs[1], ws[0]);
        let xd = self.nodes[x].value.data();
        let wd = self.nodes[w].value.data();
        let bd = self.nodes[b].value.data();
        assert_eq!(bd.len(), out);
        let mut y = vec![0.0; n * out];
        for i in 0..n {
            for o in 0..out {
                let mut s = bd[o];
                for j in 0..f {
                    s += xd[i * f + j] * wd[o * f + j];
                }
                y[i * out + o] = s;
            }
        }
        let t = Tensor::new(vec![n, out], y).expect("linear shape");
        let rg = self.requires(&[x, w, b]);
        self.push(t, rg, Op::Linear { x, w, b })
    }

    /// Soft Dice loss on logits: probabilities via sigmoid, per-item dice
    /// (2*sum(p*t)+eps)/(sum(p)+sum(t)+eps) with eps = 1, batch-averaged,
    /// returned as 1 - mean dice. Target is an NCHW mask of 0/1 values.
    pub fn dice_loss(&mut self, logits: NodeId, target: &Tensor) -> NodeId {
        const EPS: f64 = 1.0;
        let shape = self.nodes[logits].value.shape().to_vec();
        assert_eq!(shape.as_slice(), target.shape(), "dice target shape");
        let (n, c, h, w) = nchw(&shape);
        let per = c * h * w;
        let z = self.nodes[logits].value.data();
        let t = target.data();
        let probs: Vec<f64> = z.iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect();
        let mut num = vec![0.0; n];
        let mut den = vec![0.0; n];
        let mut mean_dice = 0.0;
        for i in 0..n {
            let (mut pt, mut ps, mut ts) = (0.0, 0.0, 0.0);
            for j in i * per..(i + 1) * per {
                pt += probs[j] * t[j];
                ps += probs[j];
                ts += t[j];
            }
            num[i] = 2.0 * pt + EPS;
            den[i] = ps + ts + EPS;
            mean_dice += num[i] / den[i];
        }
        mean_dice /= n as f64;
        let rg = self.requires(&[logits]);
        self.push(
            Tensor::scalar(1.0 - mean_dice),
            rg,
            Op::DiceLoss { logits, target: t.to_vec(), probs, num, den },
        )
    }

    /// Mean squared error over all elements.
    pub fn mse_loss(&mut self, pred: NodeId, target: &Tensor) -> NodeId {
        assert_eq!(self.nodes[pred].value.shape(), target.shape(), "mse target shape");
        let p = self.nodes[pred].value.data();
        let t = target.data();
        let mut s = 0.0;
        for (a, b) in p.iter().zip(t) {
            let d = a - b;
            s += d * d;
        }
        let rg = self.requires(&[pred]);
        self.push(
            Tensor::scalar(s / p.len() as f64),
            rg,
            Op::MseLoss { pred, target: t.to_vec() },
        )
    }

    /// Cross entropy on logits [n, k] with integer labels; fused
    /// log-softmax (max-shifted), batch-averaged.
    pub fn cross_entropy(&mut self, logits: NodeId, labels: &[usize]) -> NodeId {
        let shape = self.nodes[logits].value.shape();
        assert_eq!(shape.len(), 2);
        let (n, kk) = (shape[0], shape[1]);
        assert_eq!(labels.len(), n);
        let z = self.nodes[logits].value.data();
        let mut probs = vec![0.0; n * kk];
        let mut loss = 0.0;
        for i in 0..n {
            assert!(labels[i] < kk, "label {} out of range {kk}", labels[i]);
            let row = &z[i * kk..(i + 1) * kk];
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for &v in row {
                denom += (v - mx).exp();
            }
            let lse = mx + denom.ln();
            loss += lse - row[labels[i]];
            for j in 0..kk {
                probs[i * kk + j] = (row[j] - lse).exp();
            }
        }
        let rg = self.requires(&[logits]);
        self.push(
            Tensor::scalar(loss / n as f64),
            rg,
            Op::CrossEntropy { logits, labels: labels.to_vec(), probs },
        )
    }

    /// Reverse sweep seeding d(loss)/d(loss) = 1. Gradients accumulate into
    /// every node on the path to leaves with requires_grad.
    pub fn backward(&mut self, loss: NodeId) {
        assert_eq!(self.nodes[loss].value.len(), 1, "backward target must be scalar");
        for node in &mut self.nodes {
            node.grad = None;
        }
        self.nodes[loss].grad = Some(vec![1.0]);
        for id in (0..=loss).rev() {
            if self.nodes[id].grad.is_none() || !self.nodes[id].requires_grad {
                continue;
            }
            let (head, tail) = self.nodes.split_at_mut(id);
            let node = &tail[0];
            let dy = node.grad.as_ref().expect("checked above");
            match &node.op {
                Op::Leaf => {}
                Op::Add { a, b } => {
                    add_grad(&mut head[*a], dy);
                    add_grad(&mut head[*b], dy);
                }
                Op::Scale { x, factor } => {
                    let scaled: Vec<f64> = dy.iter().map(|v| v * factor).collect();
                    add_grad(&mut head[*x], &scaled);
                }
                Op::Relu { x } => {
                    let mask = node.value.data();
                    let dx: Vec<f64> = dy
                        .iter()
                        .zip(mask)
                        .map(|(&g, &y)| if y > 0.0 { g } else { 0.0 })
                        .collect();
                    add_grad(&mut head[*x], &dx);
                }
                Op::Sigmoid { x } => {
                    let y = node.value.data();
                    let dx: Vec<f64> =
                        dy.iter().zip(y).map(|(&g, &s)| g * s * (1.0 - s)).collect();
                    add_grad(&mut head[*x], &dx);
                }
                Op::Conv2d { x, w, b, dims } => {
                    let mut dw = vec![0.0; head[*w].value.len()];
                    let mut db = vec![0.0; head[*b].value.len()];
                    let mut dx = if head[*x].requires_grad {
                        Some(vec![0.0; head[*x].value.len()])
                    } else {
                        None
                    };
                    k::conv2d_backward(
                        head[*x].value.data(),
                        head[*w].value.data(),
                        dy,
                        dims,
                        dx.as_deref_mut(),
                        &mut dw,
                        &mut db,
                    );
                    add_grad(&mut head[*w], &dw);
                    add_grad(&mut head[*b], &db);
                    if let Some(dx) = dx {
                        add_grad(&mut head[*x], &dx);
                    }
                }
                Op::BatchNorm { x, gamma, beta, mean, inv_std, batch_stats, n, c, hw } => {
                    let mut dx = vec![0.0; head[*x].value.len()];
                    let mut dgamma = vec![0.0; *c];
                    let mut dbeta = vec![0.0; *c];
                    let f = if *batch_stats { k::bn_backward_train } else { k::bn_backward_eval };
                    f(
                        head[*x].value.data(),
                        dy,
                        mean,
                        inv_std,
                        head[*gamma].value.data(),
                        *n,
                        *c,
                        *hw,
                        &mut dx,
                        &mut dgamma,
                        &mut dbeta,
                    );
                    if head[*x].requires_grad {
                        add_grad(&mut head[*x], &dx);
                    }
                    add_grad(&mut head[*gamma], &dgamma);
                    add_grad(&mut head[*beta], &dbeta);
                }
                Op::MaxPool2x { x, argmax } => {
                    let mut dx = vec![0.0; head[*x].value.len()];
                    k::maxpool2x_backward(dy, argmax, &mut dx);
                    add_grad(&mut head[*x], &dx);
                }
                Op::Upsample2x { x, n, c, h, w } => {
                    let mut dx = vec![0.0; head[*x].value.len()];
                    k::upsample2x_backward(dy, *n, *c, *h, *w, &mut dx);
                    add_grad(&mut head[*x], &dx);
                }
                Op::ConcatC { xs, n, hw } => {
                    let c_total: usize = xs.iter().map(|&i| head[i].value.shape()[1]).sum();
                    let mut at = 0;
                    for &xid in xs {
                        let ci = head[xid].value.shape()[1];
                        let mut dx = vec![0.0; head[xid].value.len()];
                        for i in 0..*n {
                            let src = &dy[(i * c_total + at) * hw..(i * c_total + at + ci) * hw];
                            dx[i * ci * hw..(i + 1) * ci * hw].copy_from_slice(src);
                        }
                        if head[xid].requires_grad {
                            add_grad(&mut head[xid], &dx);
                        }
                        at += ci;
                    }
                }
                Op::Gap { x, n, c, hw } => {
                    let mut dx = vec![0.0; head[*x].value.len()];
                    for p in 0..n * c {
                        let g = dy[p] / *hw as f64;
                        for v in &mut dx[p * hw..(p + 1) * hw] {
                            *v += g;
                        }
                    }
                    add_grad(&mut head[*x], &dx);
                }
                Op::Linear { x, w, b } => {
                    let (n, f) = (head[*x].value.shape()[0], head[*x].value.shape()[1]);
                    let out = head[*w].value.shape()[0];
                    let xd = head[*x].value.data();
                    let wd = head[*w].value.data();
                    let mut dx = vec![0.0; n * f];
                    let mut dw = vec![0.0; out * f];
                    let mut db = vec![0.0; out];
                    for i in 0..n {
                        for o in 0..out {
                            let g = dy[i * out + o];
                            db[o] += g;
                            for j in 0..f {
                                dw[o * f + j] += g * xd[i * f + j];
                                dx[i * f + j] += g * wd[o * f + j];
                            }
                        }
                    }
                    if head[*x].requires_grad {
                        add_grad(&mut head[*x], &dx);
                    }
                    add_grad(&mut head[*w], &dw);
                    add_grad(&mut head[*b], &db);
                }
                Op::DiceLoss { logits, target, probs, num, den } => {
                    let g0 = dy[0];
                    let n = num.len();
                    let per = probs.len() / n;
                    let mut dz = vec![0.0; probs.len()];
                    for i in 0..n {
                        let (nu, de) = (num[i], den[i]);
                        let inv_de2 = 1.0 / (de * de);
                        for j in i * per..(i + 1) * per {
                            // d(1 - mean dice)/dp = -(2t*den - num)/den^2 / n
                            let ddice_dp = (2.0 * target[j] * de - nu) * inv_de2;
                            let p = probs[j];
                            dz[j] = g0 * (-ddice_dp / n as f64) * p * (1.0 - p);
                        }
                    }
                    add_grad(&mut head[*logits], &dz);
                }
                Op::MseLoss { pred, target } => {
                    let g0 = dy[0];
                    let len = target.len() as f64;
                    let pd = head[*pred].value.data();
                    let dx: Vec<f64> = pd
                        .iter()
                        .zip(target)
                        .map(|(&p, &t)| g0 * 2.0 * (p - t) / len)
                        .collect();
                    add_grad(&mut head[*pred], &dx);
                }
                Op::CrossEntropy { logits, labels, probs } => {
                    let g0 = dy[0];
                    let n = labels.len();
                    let kk = probs.len() / n;
                    let mut dz = probs.clone();
                    for i in 0..n {
                        dz[i * kk + labels[i]] -= 1.0;
                    }
                    for v in &mut dz {
                        *v *= g0 / n as f64;
                    }
                    add_grad(&mut head[*logits], &dz);
                }
            }
        }
    }
}

fn add_grad(node: &mut Node, src: &[f64]) {
    if !node.requires_grad {
        return;
    }
    let grad = node.grad.get_or_insert_with(|| vec![0.0; node.value.len()]);
    debug_assert_eq!(grad.len(), src.len());
    for (g, &s) in grad.iter_mut().zip(src) {
        *g += s;
    }
}
