//! Raw compute kernels on flat f64 slices. The graph layer owns shapes and
//! drives these; everything here is branch-free in data order, so results
//! are bitwise reproducible run to run.

/// `out(co x m) += a(co x k) * b(k x m)`, k blocked by 4 so each pass over
/// an output row retires four rank-1 updates.
pub fn matmul_axpy(a: &[f64], b: &[f64], out: &mut [f64], co: usize, k: usize, m: usize) {
    debug_assert_eq!(a.len(), co * k);
    debug_assert_eq!(b.len(), k * m);
    debug_assert_eq!(out.len(), co * m);
    let mut kb = 0;
    while kb + 4 <= k {
        let r0 = &b[kb * m..(kb + 1) * m];
        let r1 = &b[(kb + 1) * m..(kb + 2) * m];
        let r2 = &b[(kb + 2) * m..(kb + 3) * m];
        let r3 = &b[(kb + 3) * m..(kb + 4) * m];
        for o in 0..co {
            let arow = &a[o * k + kb..o * k + kb + 4];
            let (a0, a1, a2, a3) = (arow[0], arow[1], arow[2], arow[3]);
            let orow = &mut out[o * m..(o + 1) * m];
            for j in 0..m {
                orow[j] += a0 * r0[j] + a1 * r1[j] + a2 * r2[j] + a3 * r3[j];
            }
        }
        kb += 4;
    }
    while kb < k {
        let r0 = &b[kb * m..(kb + 1) * m];
        for o in 0..co {
            let a0 = a[o * k + kb];
            let orow = &mut out[o * m..(o + 1) * m];
            for j in 0..m {
                orow[j] += a0 * r0[j];
            }
        }
        kb += 1;
    }
}

/// `dw(co x k) += dout(co x m) * b(k x m)^T`, four dot products per pass
/// sharing one read of the dout row.
pub fn matmul_dot(dout: &[f64], b: &[f64], dw: &mut [f64], co: usize, k: usize, m: usize) {
    debug_assert_eq!(dout.len(), co * m);
    debug_assert_eq!(b.len(), k * m);
    debug_assert_eq!(dw.len(), co * k);
    for o in 0..co {
        let drow = &dout[o * m..(o + 1) * m];
        let mut kb = 0;
        while kb + 4 <= k {
            let r0 = &b[kb * m..(kb + 1) * m];
            let r1 = &b[(kb + 1) * m..(kb + 2) * m];
            let r2 = &b[(kb + 2) * m..(kb + 3) * m];
            let r3 = &b[(kb + 3) * m..(kb + 4) * m];
            let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
            for j in 0..m {
                let d = drow[j];
                s0 += d * r0[j];
                s1 += d * r1[j];
                s2 += d * r2[j];
                s3 += d * r3[j];
            }
            dw[o * k + kb] += s0;
            dw[o * k + kb + 1] += s1;
            dw[o * k + kb + 2] += s2;
            dw[o * k + kb + 3] += s3;
            kb += 4;
        }
        while kb < k {
            let r0 = &b[kb * m..(kb + 1) * m];
            let mut s0 = 0.0;
            for j in 0..m {
                s0 += drow[j] * r0[j];
            }
            dw[o * k + kb] += s0;
            kb += 1;
        }
    }
}

/// Geometry of one conv application (stride fixed at 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvDims {
    pub n: usize,
    pub ci: usize,
    pub h: usize,
    pub w: usize,
    pub co: usize,
    pub kh: usize,
    pub kw: usize,
    pub pad: usize,
}

impl ConvDims {
    pub fn ho(&self) -> usize {
        self.h + 2 * self.pad + 1 - self.kh
    }
    pub fn wo(&self) -> usize {
        self.w + 2 * self.pad + 1 - self.kw
    }
    /// im2col row count.
    pub fn k(&self) -> usize {
        self.ci * self.kh * self.kw
    }
    /// im2col column count.
    pub fn m(&self) -> usize {
        self.ho() * self.wo()
    }
}

/// Unfolds one image (ci x h x w) into cols (k x m); out-of-bounds taps are
/// zero. Row index is (c*kh + ky)*kw + kx, column index oy*wo + ox.
pub fn im2col(x: &[f64], d: &ConvDims, cols: &mut [f64]) {
    let (ho, wo) = (d.ho(), d.wo());
    debug_assert_eq!(x.len(), d.ci * d.h * d.w);
    debug_assert_eq!(cols.len(), d.k() * d.m());
    let m = d.m();
    for c in 0..d.ci {
        let plane = &x[c * d.h * d.w..(c + 1) * d.h * d.w];
        for ky in 0..d.kh {
            for kx in 0..d.kw {
                let row = &mut cols[((c * d.kh + ky) * d.kw + kx) * m..][..m];
                for oy in 0..ho {
                    let iy = (oy + ky) as isize - d.pad as isize;
                    let orow = &mut row[oy * wo..(oy + 1) * wo];
                    if iy < 0 || iy >= d.h as isize {
                        orow.fill(0.0);
                        continue;
                    }
                    let irow = &plane[iy as usize * d.w..(iy as usize + 1) * d.w];
                    for ox in 0..wo {
                        let ix = (ox + kx) as isize - d.pad as isize;
                        orow[ox] = if ix < 0 || ix >= d.w as isize {
                            0.0
                        } else {
                            irow[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Folds cols gradients back onto the image, accumulating overlapping taps.
pub fn col2im_acc(dcols: &[f64], d: &ConvDims, dx: &mut [f64]) {
    let (ho, wo) = (d.ho(), d.wo());
    debug_assert_eq!(dx.len(), d.ci * d.h * d.w);
    debug_assert_eq!(dcols.len(), d.k() * d.m());
    let m = d.m();
    for c in 0..d.ci {
        let plane = &mut dx[c * d.h * d.w..(c + 1) * d.h * d.w];
        for ky in 0..d.kh {
            for kx in 0..d.kw {
                let row = &dcols[((c * d.kh + ky) * d.kw + kx) * m..][..m];
                for oy in 0..ho {
                    let iy = (oy + ky) as isize - d.pad as isize;
                    if iy < 0 || iy >= d.h as isize {
                        continue;
                    }
                    let irow = &mut plane[iy as usize * d.w..(iy as usize + 1) * d.w];
                    let orow = &row[oy * wo..(oy + 1) * wo];
                    for ox in 0..wo {
                        let ix = (ox + kx) as isize - d.pad as isize;
                        if ix >= 0 && ix < d.w as isize {
                            irow[ix as usize] += orow[ox];
                        }
                    }
                }
            }
        }
    }
}

/// NCHW conv forward; `y` must be zeroed, sized n*co*ho*wo. `cols` is a
/// k() x m() scratch buffer.
pub fn conv2d_forward(
    x: &[f64],
    wgt: &[f64],
    bias: &[f64],
    d: &ConvDims,
    cols: &mut [f64],
    y: &mut [f64],
) {
    let (k, m) = (d.k(), d.m());
    let in_stride = d.ci * d.h * d.w;
    let out_stride = d.co * m;
    for i in 0..d.n {
        im2col(&x[i * in_stride..(i + 1) * in_stride], d, cols);
        let yi = &mut y[i * out_stride..(i + 1) * out_stride];
        matmul_axpy(wgt, cols, yi, d.co, k, m);
        for o in 0..d.co {
            let b = bias[o];
            for v in &mut yi[o * m..(o + 1) * m] {
                *v += b;
            }
        }
    }
}

/// Conv backward. Recomputes im2col per item instead of keeping all column
/// buffers alive; `dx`, `dw`, `db` are accumulated into (callers zero them).
/// `dx: None` skips the input gradient (first layer on a constant input).
pub fn conv2d_backward(
    x: &[f64],
    wgt: &[f64],
    dy: &[f64],
    d: &ConvDims,
    mut dx: Option<&mut [f64]>,
    dw: &mut [f64],
    db: &mut [f64],
) {
    let (k, m) = (d.k(), d.m());
    let in_stride = d.ci * d.h * d.w;
    let out_stride = d.co * m;
    let mut cols = vec![0.0; k * m];
    let mut dcols = if dx.is_some() { vec![0.0; k * m] } else { Vec::new() };
    for i in 0..d.n {
        im2col(&x[i * in_stride..(i + 1) * in_stride], d, &mut cols);
        let dyi = &dy[i * out_stride..(i + 1) * out_stride];
        matmul_dot(dyi, &cols, dw, d.co, k, m);
        if let Some(dx) = dx.as_deref_mut() {
            // dcols = wgt^T * dyi, contracting over output channels.
            dcols.fill(0.0);
            for o in 0..d.co {
                let wrow = &wgt[o * k..(o + 1) * k];
                let drow = &dyi[o * m..(o + 1) * m];
                for (kk, &wv) in wrow.iter().enumerate() {
                    let crow = &mut dcols[kk * m..(kk + 1) * m];
                    for j in 0..m {
                        crow[j] += wv * drow[j];
                    }
                }
            }
            col2im_acc(&dcols, d, &mut dx[i * in_stride..(i + 1) * in_stride]);
        }
        for o in 0..d.co {
            let mut s = 0.0;
            for &v in &dyi[o * m..(o + 1) * m] {
                s += v;
            }
            db[o] += s;
        }
    }
}

/// Per-channel batch statistics over n*h*w elements: (mean, biased variance).
pub fn bn_batch_stats(x: &[f64], n: usize, c: usize, hw: usize) -> (Vec<f64>, Vec<f64>) {
    let count = (n * hw) as f64;
    let mut mean = vec![0.0; c];
    let mut var = vec![0.0; c];
    for i in 0..n {
        for ch in 0..c {
            let plane = &x[(i * c + ch) * hw..(i * c + ch + 1) * hw];
            let mut s = 0.0;
            for &v in plane {
                s += v;
            }
            mean[ch] += s;
        }
    }
    for m in &mut mean {
        *m /= count;
    }
    for i in 0..n {
        for ch in 0..c {
            let plane = &x[(i * c + ch) * hw..(i * c + ch + 1) * hw];
            let mu = mean[ch];
            let mut s = 0.0;
            for &v in plane {
                let dvv = v - mu;
                s += dvv * dvv;
            }
            var[ch] += s;
        }
    }
    for v in &mut var {
        *v /= count;
    }
    (mean, var)
}

/// `y = gamma * (x - mean) * inv_std + beta` per channel.
pub fn bn_normalize(
    x: &[f64],
    mean: &[f64],
    inv_std: &[f64],
    gamma: &[f64],
    beta: &[f64],
    n: usize,
    c: usize,
    hw: usize,
    y: &mut [f64],
) {
    for i in 0..n {
        for ch in 0..c {
            let plane = &x[(i * c + ch) * hw..(i * c + ch + 1) * hw];
            let out = &mut y[(i * c + ch) * hw..(i * c + ch + 1) * hw];
            let (mu, is, g, b) = (mean[ch], inv_std[ch], gamma[ch], beta[ch]);
            for (o, &v) in out.iter_mut().zip(plane) {
                *o = g * (v - mu) * is + b;
            }
        }
    }
}

/// Batch-stats backward. With mu and sigma functions of x, the chain rule
/// gives dx = g*is * (dy - mean(dy) - xhat * mean(dy*xhat)) per channel,
/// means over the n*hw elements of the channel.
#[allow(clippy::too_many_arguments)]
pub fn bn_backward_train(
    x: &[f64],
    dy: &[f64],
    mean: &[f64],
    inv_std: &[f64],
    gamma: &[f64],
    n: usize,
    c: usize,
    hw: usize,
    dx: &mut [f64],
    dgamma: &mut [f64],
    dbeta: &mut [f64],
) {
    let count = (n * hw) as f64;
    let mut sum_dy = vec![0.0; c];
    let mut sum_dy_xhat = vec![0.0; c];
    for i in 0..n {
        for ch in 0..c {
            let xp = &x[(i * c + ch) * hw..(i * c + ch + 1) * hw];
            let dp = &dy[(i * c + ch) * hw..(i * c + ch + 1) * hw];
            let (mu, is) = (mean[ch], inv_std[ch]);
            let (mut s, mut sx) = (0.0, 0.0);
            for (&xv, &dv) in xp.iter().zip(dp) {
                s += dv;
                sx += dv * (xv - mu) * is;
            }
            sum_dy[ch] += s;
            sum_dy_xhat[ch] += sx;
        }
    }
    for ch in 0..c {
        dgamma[ch] += sum_dy_xhat[ch];
        dbeta[ch] += sum_dy[ch];
    }
    for i in 0..n {
        for ch in 0..c {
            let xp = &x[(i * c + ch) * hw..(i * c + ch + 1) * hw];
            let dp = &dy[(i * c + ch) * hw..(i * c + ch + 1) * hw];
            let out = &mut dx[(i * c + ch) * hw..(i * c + ch + 1) * hw];
            let (mu, is, g) = (mean[ch], inv_std[ch], gamma[ch]);
            let mdy = sum_dy[ch] / count;
            let mdyx = sum_dy_xhat[ch] / count;
            for ((o, &xv), &dv) in out.iter_mut().zip(xp).zip(dp) {
                let xhat = (xv - mu) * is;
                *o += g * is * (dv - mdy - xhat * mdyx);
            }
        }
    }
}

/// Running-stats backward (stats are constants): dx = dy * gamma * inv_std.
#[allow(clippy::too_many_arguments)]
pub fn bn_backward_eval(
    x: &[f64],
    dy: &[f64],
    mean: &[f64],
    inv_std: &[f64],
    gamma: &[f64],
    n: usize,
    c: usize,
    hw: usize,
    dx: &mut [f64],
    dgamma: &mut [f64],
    dbeta: &mut [f64],
) {
    for i in 0..n {
        for ch in 0..c {
            let xp = &x[(i * c + ch) * hw..(i * c + ch + 1) * hw];
            let dp = &dy[(i * c + ch) * hw..(i * c + ch + 1) * hw];
            let out = &mut dx[(i * c + ch) * hw..(i * c + ch + 1) * hw];
            let (mu, is, g) = (mean[ch], inv_std[ch], gamma[ch]);
            let (mut s, mut sx) = (0.0, 0.0);
            for ((o, &xv), &dv) in out.iter_mut().zip(xp).zip(dp) {
                s += dv;
                sx += dv * (xv - mu) * is;
                *o += dv * g * is;
            }
            dgamma[ch] += sx;
            dbeta[ch] += s;
        }
    }
}

/// 2x2 max pooling, stride 2; ties go to the first index in row-major scan
/// order. Returns flat argmax indices into the input plane for backward.
pub fn maxpool2x_forward(
    x: &[f64],
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    y: &mut [f64],
    argmax: &mut [usize],
) {
    debug_assert!(h % 2 == 0 && w % 2 == 0, "pooling needs even spatial dims");
    let (ho, wo) = (h / 2, w / 2);
    for p in 0..n * c {
        let plane = &x[p * h * w..(p + 1) * h * w];
        let yp = &mut y[p * ho * wo..(p + 1) * ho * wo];
        let ap = &mut argmax[p * ho * wo..(p + 1) * ho * wo];
        for oy in 0..ho {
            for ox in 0..wo {
                let base = (2 * oy) * w + 2 * ox;
                let cand = [base, base + 1, base + w, base + w + 1];
                let mut best = cand[0];
                for &idx in &cand[1..] {
                    if plane[idx] > plane[best] {
                        best = idx;
                    }
                }
                yp[oy * wo + ox] = plane[best];
                ap[oy * wo + ox] = p * h * w + best;
            }
        }
    }
}

pub fn maxpool2x_backward(dy: &[f64], argmax: &[usize], dx: &mut [f64]) {
    for (&g, &idx) in dy.iter().zip(argmax) {
        dx[idx] += g;
    }
}

/// Nearest-neighbor 2x upsampling.
pub fn upsample2x_forward(x: &[f64], n: usize, c: usize, h: usize, w: usize, y: &mut [f64]) {
    let (ho, wo) = (2 * h, 2 * w);
    for p in 0..n * c {
        let plane = &x[p * h * w..(p + 1) * h * w];
        let yp = &mut y[p * ho * wo..(p + 1) * ho * wo];
        for oy in 0..ho {
            let irow = &plane[(oy / 2) * w..(oy / 2 + 1) * w];
            let orow = &mut yp[oy * wo..(oy + 1) * wo];
            for ox in 0..wo {
                orow[ox] = irow[ox / 2];
            }
        }
    }
}

pub fn upsample2x_backward(dy: &[f64], n: usize, c: usize, h: usize, w: usize, dx: &mut [f64]) {
    let (ho, wo) = (2 * h, 2 * w);
    for p in 0..n * c {
        let dyp = &dy[p * ho * wo..(p + 1) * ho * wo];
        let dxp = &mut dx[p * h * w..(p + 1) * h * w];
        for oy in 0..ho {
            let drow = &dyp[oy * wo..(oy + 1) * wo];
            let xrow = &mut dxp[(oy / 2) * w..(oy / 2 + 1) * w];
            for ox in 0..wo {
                xrow[ox / 2] += drow[ox];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_conv(x: &[f64], wgt: &[f64], bias: &[f64], d: &ConvDims) -> Vec<f64> {
        let (ho, wo) = (d.ho(), d.wo());
        let mut y = vec![0.0; d.n * d.co * ho * wo];
        for i in 0..d.n {
            for o in 0..d.co {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let mut s = bias[o];
                        for c in 0..d.ci {
                            for ky in 0..d.kh {
                                for kx in 0..d.kw {
                                    let iy = (oy + ky) as isize - d.pad as isize;
                                    let ix = (ox + kx) as isize - d.pad as isize;
                                    if iy < 0 || ix < 0 || iy >= d.h as isize || ix >= d.w as isize
                                    {
                                        continue;
                                    }
                                    let xv = x[((i * d.ci + c) * d.h + iy as usize) * d.w
                                        + ix as usize];
                                    let wv = wgt[((o * d.ci + c) * d.kh + ky) * d.kw + kx];
                                    s += xv * wv;
                                }
                            }
                        }
                        y[((i * d.co + o) * ho + oy) * wo + ox] = s;
                    }
                }
            }
        }
        y
    }

    fn lcg_fill(buf: &mut [f64], mut state: u64) {
        for v in buf.iter_mut() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *v = ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0;
        }
    }

    #[test]
    fn conv_all_ones_kernel_counts_taps() {
        // 3x3 ones kernel over a ones image: interior 9, edge 6, corner 4.
        let d = ConvDims { n: 1, ci: 1, h: 5, w: 5, co: 1, kh: 3, kw: 3, pad: 1 };
        let x = vec![1.0; 25];
        let wgt = vec![1.0; 9];
        let mut cols = vec![0.0; d.k() * d.m()];
        let mut y = vec![0.0; 25];
        conv2d_forward(&x, &wgt, &[0.0], &d, &mut cols, &mut y);
        assert_eq!(y[2 * 5 + 2], 9.0);
        assert_eq!(y[2 * 5], 6.0);
        assert_eq!(y[0], 4.0);
        assert_eq!(y[4], 4.0);
    }

    #[test]
    fn conv_matches_naive_on_random_shapes() {
        let cases = [
            ConvDims { n: 2, ci: 3, h: 6, w: 5, co: 4, kh: 3, kw: 3, pad: 1 },
            ConvDims { n: 1, ci: 4, h: 4, w: 4, co: 2, kh: 1, kw: 1, pad: 0 },
            ConvDims { n: 3, ci: 2, h: 7, w: 3, co: 5, kh: 3, kw: 3, pad: 1 },
        ];
        for (ci, d) in cases.iter().enumerate() {
            let mut x = vec![0.0; d.n * d.ci * d.h * d.w];
            let mut wgt = vec![0.0; d.co * d.k()];
            let mut bias = vec![0.0; d.co];
            lcg_fill(&mut x, 17 + ci as u64);
            lcg_fill(&mut wgt, 99 + ci as u64);
            lcg_fill(&mut bias, 7 + ci as u64);
            let mut cols = vec![0.0; d.k() * d.m()];
            let mut y = vec![0.0; d.n * d.co * d.m()];
            conv2d_forward(&x, &wgt, &bias, d, &mut cols, &mut y);
            let want = naive_conv(&x, &wgt, &bias, d);
            for (a, b) in y.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12, "case {ci}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn conv_backward_matches_finite_differences() {
        let d = ConvDims { n: 2, ci: 2, h: 4, w: 4, co: 3, kh: 3, kw: 3, pad: 1 };
        let mut x = vec![0.0; d.n * d.ci * d.h * d.w];
        let mut wgt = vec![0.0; d.co * d.k()];
        let mut bias = vec![0.0; d.co];
        lcg_fill(&mut x, 5);
        lcg_fill(&mut wgt, 6);
        lcg_fill(&mut bias, 8);
        let m = d.m();
        // Loss = sum of y * coeff with fixed pseudo-random coeffs.
        let mut coeff = vec![0.0; d.n * d.co * m];
        lcg_fill(&mut coeff, 31);

        let loss = |x: &[f64], wgt: &[f64], bias: &[f64]| -> f64 {
            let mut cols = vec![0.0; d.k() * m];
            let mut y = vec![0.0; d.n * d.co * m];
            conv2d_forward(x, wgt, bias, &d, &mut cols, &mut y);
            y.iter().zip(&coeff).map(|(a, b)| a * b).sum()
        };

        let mut dx = vec![0.0; x.len()];
        let mut dw = vec![0.0; wgt.len()];
        let mut db = vec![0.0; bias.len()];
        conv2d_backward(&x, &wgt, &coeff, &d, Some(&mut dx), &mut dw, &mut db);

        let eps = 1e-6;
        let check = |buf: &mut Vec<f64>, grad: &[f64], probes: &[usize], which: u8| {
            for &i in probes {
                let orig = buf[i];
                buf[i] = orig + eps;
                let hi = match which {
                    0 => loss(buf, &wgt, &bias),
                    1 => loss(&x, buf, &bias),
                    _ => loss(&x, &wgt, buf),
                };
                buf[i] = orig - eps;
                let lo = match which {
                    0 => loss(buf, &wgt, &bias),
                    1 => loss(&x, buf, &bias),
                    _ => loss(&x, &wgt, buf),
                };
                buf[i] = orig;
                let fd = (hi - lo) / (2.0 * eps);
                let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-8);
                assert!(rel < 1e-6, "which={which} i={i}: fd {fd} vs {}", grad[i]);
            }
        };
        let mut xm = x.clone();
        let mut wm = wgt.clone();
        let mut bm = bias.clone();
        check(&mut xm, &dx, &[0, 13, 37, 60], 0);
        check(&mut wm, &dw, &[0, 25, 41, 53], 1);
        check(&mut bm, &db, &[0, 1, 2], 2);
    }

    #[test]
    fn bn_normalizes_to_zero_mean_unit_var() {
        let (n, c, hw) = (4, 3, 16);
        let mut x = vec![0.0; n * c * hw];
        lcg_fill(&mut x, 3);
        for v in &mut x {
            *v = *v * 3.0 + 0.7;
        }
        let (mean, var) = bn_batch_stats(&x, n, c, hw);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + 1e-5).sqrt()).collect();
        let mut y = vec![0.0; x.len()];
        bn_normalize(&x, &mean, &inv_std, &vec![1.0; c], &vec![0.0; c], n, c, hw, &mut y);
        for ch in 0..c {
            let (mut s, mut s2, mut cnt) = (0.0, 0.0, 0.0);
            for i in 0..n {
                for &v in &y[(i * c + ch) * hw..(i * c + ch + 1) * hw] {
                    s += v;
                    s2 += v * v;
                    cnt += 1.0;
                }
            }
            let m = s / cnt;
            let v = s2 / cnt - m * m;
            assert!(m.abs() < 1e-12, "channel {ch} mean {m}");
            assert!((v - 1.0).abs() < 1e-4, "channel {ch} var {v}");
        }
    }

    #[test]
    fn maxpool_picks_first_on_ties_and_routes_gradient() {
        let x = vec![
            1.0, 1.0, 2.0, 0.0, //
            1.0, 1.0, 0.0, 2.0, //
            5.0, 0.0, 3.0, 3.0, //
            0.0, 5.0, 3.0, 3.0,
        ];
        let mut y = vec![0.0; 4];
        let mut arg = vec![0usize; 4];
        maxpool2x_forward(&x, 1, 1, 4, 4, &mut y, &mut arg);
        assert_eq!(y, vec![1.0, 2.0, 5.0, 3.0]);
        // All-equal block: first index (0,0) wins; 5 appears at (2,0) first.
        assert_eq!(arg[0], 0);
        assert_eq!(arg[2], 8);
        assert_eq!(arg[3], 10);
        let mut dx = vec![0.0; 16];
        maxpool2x_backward(&[1.0, 10.0, 100.0, 1000.0], &arg, &mut dx);
        assert_eq!(dx[0], 1.0);
        assert_eq!(dx[8], 100.0);
        assert_eq!(dx[10], 1000.0);
        assert_eq!(dx.iter().sum::<f64>(), 1111.0);
    }

    #[test]
    fn upsample_round_trip_shapes_and_gradient_sum() {
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let mut y = vec![0.0; 16];
        upsample2x_forward(&x, 1, 1, 2, 2, &mut y);
        assert_eq!(y[0], 1.0);
        assert_eq!(y[1], 1.0);
        assert_eq!(y[4], 1.0);
        assert_eq!(y[5], 1.0);
        assert_eq!(y[15], 4.0);
        let dy = vec![1.0; 16];
        let mut dx = vec![0.0; 4];
        upsample2x_backward(&dy, 1, 1, 2, 2, &mut dx);
        assert_eq!(dx, vec![4.0; 4]);
    }

    #[test]
    fn matmul_kernels_agree_with_naive() {
        let (co, k, m) = (5, 11, 13);
        let mut a = vec![0.0; co * k];
        let mut b = vec![0.0; k * m];
        let mut dout = vec![0.0; co * m];
        lcg_fill(&mut a, 1);
        lcg_fill(&mut b, 2);
        lcg_fill(&mut dout, 3);

        let mut got = vec![0.0; co * m];
        matmul_axpy(&a, &b, &mut got, co, k, m);
        for o in 0..co {
            for j in 0..m {
                let want: f64 = (0..k).map(|kk| a[o * k + kk] * b[kk * m + j]).sum();
                assert!((got[o * m + j] - want).abs() < 1e-12);
            }
        }

        let mut dw = vec![0.0; co * k];
        matmul_dot(&dout, &b, &mut dw, co, k, m);
        for o in 0..co {
            for kk in 0..k {
                let want: f64 = (0..m).map(|j| dout[o * m + j] * b[kk * m + j]).sum();
                assert!((dw[o * k + kk] - want).abs() < 1e-12);
            }
        }
    }
}
