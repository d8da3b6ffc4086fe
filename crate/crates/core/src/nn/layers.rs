//! Forward and backward kernels for the closed set of layer kinds.
//!
//! Convolutions are lowered to GEMM through a per-sample im2col buffer.
//! Weight gradients are reduced over fixed groups of samples and the group
//! partials are summed in order, so results do not depend on how many
//! threads ran the groups.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{par, NnError, Real, Tensor};

/// Samples per partial weight-gradient accumulator.
const GRAD_GROUP: usize = 8;

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.99;

fn shape_err(op: &'static str, detail: alloc::string::String) -> NnError {
    NnError::Shape { op, detail }
}

fn im2col<T: Real>(x: &[T], h: usize, w: usize, cin: usize, k: usize, col: &mut [T]) {
    let kk = k * k * cin;
    let pad = (k / 2) as isize;
    for y in 0..h {
        for xx in 0..w {
            let row = &mut col[(y * w + xx) * kk..(y * w + xx + 1) * kk];
            for ky in 0..k {
                let iy = y as isize + ky as isize - pad;
                for kx in 0..k {
                    let ix = xx as isize + kx as isize - pad;
                    let dst = &mut row[(ky * k + kx) * cin..(ky * k + kx + 1) * cin];
                    if iy >= 0 && iy < h as isize && ix >= 0 && ix < w as isize {
                        let src = (iy as usize * w + ix as usize) * cin;
                        dst.copy_from_slice(&x[src..src + cin]);
                    } else {
                        dst.fill(T::zero());
                    }
                }
            }
        }
    }
}

fn col2im<T: Real>(col: &[T], h: usize, w: usize, cin: usize, k: usize, x: &mut [T]) {
    let kk = k * k * cin;
    let pad = (k / 2) as isize;
    for y in 0..h {
        for xx in 0..w {
            let row = &col[(y * w + xx) * kk..(y * w + xx + 1) * kk];
            for ky in 0..k {
                let iy = y as isize + ky as isize - pad;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                for kx in 0..k {
                    let ix = xx as isize + kx as isize - pad;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    let dst = (iy as usize * w + ix as usize) * cin;
                    let src = &row[(ky * k + kx) * cin..(ky * k + kx + 1) * cin];
                    for (d, &s) in x[dst..dst + cin].iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
        }
    }
}

fn conv_dims<T: Real>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
) -> Result<(usize, usize, usize, usize, usize, usize), NnError> {
    let (n, h, w, cin) = x.dims4("conv2d")?;
    let [kh, kw, wcin, cout] = *weight.shape() else {
        return Err(shape_err(
            "conv2d",
            format!("weight must be rank 4, got {:?}", weight.shape()),
        ));
    };
    if kh != kw || kh % 2 == 0 {
        return Err(shape_err(
            "conv2d",
            format!("kernel must be square and odd, got {kh}×{kw}"),
        ));
    }
    if wcin != cin {
        return Err(shape_err(
            "conv2d",
            format!("input has {cin} channels but weight expects {wcin}"),
        ));
    }
    Ok((n, h, w, cin, kh, cout))
}

/// Stride-1 "same" zero-padded cross-correlation.
/// `x`: N×H×W×Cin, `weight`: k×k×Cin×Cout, `bias`: Cout.
pub fn conv2d_forward<T: Real>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>, NnError> {
    let (n, h, w, cin, k, cout) = conv_dims(x, weight)?;
    if bias.shape() != [cout] {
        return Err(shape_err(
            "conv2d",
            format!("bias must be [{cout}], got {:?}", bias.shape()),
        ));
    }
    let hw = h * w;
    let kk = k * k * cin;
    let mut out = Tensor::zeros(&[n, h, w, cout]);
    let xs = x.data();
    let ws = weight.data();
    let bs = bias.data();
    par::chunks_mut(out.data_mut(), hw * cout, |i, out_n| {
        for row in out_n.chunks_mut(cout) {
            row.copy_from_slice(bs);
        }
        let x_n = &xs[i * hw * cin..(i + 1) * hw * cin];
        if k == 1 {
            T::gemm(
                hw,
                cin,
                cout,
                T::one(),
                x_n,
                false,
                ws,
                false,
                T::one(),
                out_n,
            );
        } else {
            let mut col = vec![T::zero(); hw * kk];
            im2col(x_n, h, w, cin, k, &mut col);
            T::gemm(
                hw,
                kk,
                cout,
                T::one(),
                &col,
                false,
                ws,
                false,
                T::one(),
                out_n,
            );
        }
    });
    Ok(out)
}

pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn conv2d_backward<T: Real>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<ConvGrads<T>, NnError> {
    let (n, h, w, cin, k, cout) = conv_dims(x, weight)?;
    if grad_out.shape() != [n, h, w, cout] {
        return Err(shape_err(
            "conv2d_backward",
            format!(
                "grad_out {:?} does not match output [{n}, {h}, {w}, {cout}]",
                grad_out.shape()
            ),
        ));
    }
    let hw = h * w;
    let kk = k * k * cin;
    let xs = x.data();
    let ws = weight.data();
    let gs = grad_out.data();
    let mut grad_x = Tensor::zeros(x.shape());
    let partials = par::chunks_map(grad_x.data_mut(), GRAD_GROUP * hw * cin, |g, gx_group| {
        let mut dw = vec![T::zero(); kk * cout];
        let mut db = vec![0.0_f64; cout];
        let mut col = if k == 1 {
            Vec::new()
        } else {
            vec![T::zero(); hw * kk]
        };
        let mut gcol = if k == 1 {
            Vec::new()
        } else {
            vec![T::zero(); hw * kk]
        };
        for (j, gx_n) in gx_group.chunks_mut(hw * cin).enumerate() {
            let i = g * GRAD_GROUP + j;
            let x_n = &xs[i * hw * cin..(i + 1) * hw * cin];
            let g_n = &gs[i * hw * cout..(i + 1) * hw * cout];
            for row in g_n.chunks(cout) {
                for (acc, &v) in db.iter_mut().zip(row) {
                    *acc += v.to_f64();
                }
            }
            if k == 1 {
                T::gemm(
                    hw,
                    cout,
                    cin,
                    T::one(),
                    g_n,
                    false,
                    ws,
                    true,
                    T::zero(),
                    gx_n,
                );
                T::gemm(
                    cin,
                    hw,
                    cout,
                    T::one(),
                    x_n,
                    true,
                    g_n,
                    false,
                    T::one(),
                    &mut dw,
                );
            } else {
                im2col(x_n, h, w, cin, k, &mut col);
                T::gemm(
                    kk,
                    hw,
                    cout,
                    T::one(),
                    &col,
                    true,
                    g_n,
                    false,
                    T::one(),
                    &mut dw,
                );
                T::gemm(
                    hw,
                    cout,
                    kk,
                    T::one(),
                    g_n,
                    false,
                    ws,
                    true,
                    T::zero(),
                    &mut gcol,
                );
                col2im(&gcol, h, w, cin, k, gx_n);
            }
        }
        (dw, db)
    });
    let mut grad_w = Tensor::zeros(weight.shape());
    let mut grad_b = vec![0.0_f64; cout];
    for (dw, db) in partials {
        grad_w
            .data_mut()
            .iter_mut()
            .zip(&dw)
            .for_each(|(a, &b)| *a += b);
        grad_b.iter_mut().zip(&db).for_each(|(a, &b)| *a += b);
    }
    let grad_b = Tensor::from_vec(&[cout], grad_b.into_iter().map(T::from_f64).collect())?;
    Ok(ConvGrads {
        input: grad_x,
        weight: grad_w,
        bias: grad_b,
    })
}

/// 2×2 max pooling. The mask records which of the four block positions (in
/// row-major order) won; ties go to the earliest.
pub fn maxpool2x2_forward<T: Real>(x: &Tensor<T>) -> Result<(Tensor<T>, Vec<u8>), NnError> {
    let (n, h, w, c) = x.dims4("maxpool2x2")?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(shape_err(
            "maxpool2x2",
            format!("spatial dims must be even, got {h}×{w}"),
        ));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[n, oh, ow, c]);
    let mut mask = vec![0u8; n * oh * ow * c];
    let xs = x.data();
    let os = out.data_mut();
    for b in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                let base = ((b * oh + oy) * ow + ox) * c;
                let offsets = [
                    ((b * h + 2 * oy) * w + 2 * ox) * c,
                    ((b * h + 2 * oy) * w + 2 * ox + 1) * c,
                    ((b * h + 2 * oy + 1) * w + 2 * ox) * c,
                    ((b * h + 2 * oy + 1) * w + 2 * ox + 1) * c,
                ];
                for ch in 0..c {
                    let mut best = xs[offsets[0] + ch];
                    let mut arg = 0u8;
                    for (j, &off) in offsets.iter().enumerate().skip(1) {
                        let v = xs[off + ch];
                        if v > best {
                            best = v;
                            arg = j as u8;
                        }
                    }
                    os[base + ch] = best;
                    mask[base + ch] = arg;
                }
            }
        }
    }
    Ok((out, mask))
}

pub fn maxpool2x2_backward<T: Real>(
    mask: &[u8],
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>, NnError> {
    let (n, oh, ow, c) = grad_out.dims4("maxpool2x2_backward")?;
    if mask.len() != grad_out.len() {
        return Err(shape_err(
            "maxpool2x2_backward",
            format!("mask has {} entries", mask.len()),
        ));
    }
    let (h, w) = (oh * 2, ow * 2);
    let mut grad = Tensor::zeros(&[n, h, w, c]);
    let gs = grad_out.data();
    let gx = grad.data_mut();
    for b in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                let base = ((b * oh + oy) * ow + ox) * c;
                for ch in 0..c {
                    let j = mask[base + ch] as usize;
                    let (dy, dx) = (j / 2, j % 2);
                    gx[((b * h + 2 * oy + dy) * w + 2 * ox + dx) * c + ch] += gs[base + ch];
                }
            }
        }
    }
    Ok(grad)
}

/// Nearest-neighbour 2× upsampling.
pub fn upsample2x2_forward<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    let (n, h, w, c) = x.dims4("upsample2x2")?;
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = Tensor::zeros(&[n, oh, ow, c]);
    let xs = x.data();
    let os = out.data_mut();
    for b in 0..n {
        for y in 0..oh {
            for xx in 0..ow {
                let src = ((b * h + y / 2) * w + xx / 2) * c;
                let dst = ((b * oh + y) * ow + xx) * c;
                os[dst..dst + c].copy_from_slice(&xs[src..src + c]);
            }
        }
    }
    Ok(out)
}

/// Sums each 2×2 block of the incoming gradient.
pub fn upsample2x2_backward<T: Real>(grad_out: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    let (n, oh, ow, c) = grad_out.dims4("upsample2x2_backward")?;
    if oh % 2 != 0 || ow % 2 != 0 {
        return Err(shape_err(
            "upsample2x2_backward",
            format!("odd gradient dims {oh}×{ow}"),
        ));
    }
    let (h, w) = (oh / 2, ow / 2);
    let mut grad = Tensor::zeros(&[n, h, w, c]);
    let gs = grad_out.data();
    let gx = grad.data_mut();
    for b in 0..n {
        for y in 0..oh {
            for xx in 0..ow {
                let src = ((b * oh + y) * ow + xx) * c;
                let dst = ((b * h + y / 2) * w + xx / 2) * c;
                for ch in 0..c {
                    gx[dst + ch] += gs[src + ch];
                }
            }
        }
    }
    Ok(grad)
}

/// Per-channel batch statistics kept for the backward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    pub normalized: Tensor<T>,
    pub inv_std: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

fn check_channel_params<T: Real>(
    op: &'static str,
    c: usize,
    params: &[&Tensor<T>],
) -> Result<(), NnError> {
    for p in params {
        if p.shape() != [c] {
            return Err(shape_err(
                op,
                format!(
                    "channel parameter {:?} does not match {c} channels",
                    p.shape()
                ),
            ));
        }
    }
    Ok(())
}

/// Normalize with this batch's mean and (biased) variance over N·H·W.
pub fn batchnorm_forward_train<T: Real>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
) -> Result<(Tensor<T>, BatchNormCache<T>), NnError> {
    let (n, h, w, c) = x.dims4("batchnorm")?;
    check_channel_params("batchnorm", c, &[gamma, beta])?;
    let m = n * h * w;
    if m == 0 {
        return Err(NnError::EmptyBatch);
    }
    let xs = x.data();
    let mut mean = vec![0.0_f64; c];
    for row in xs.chunks(c) {
        for (a, &v) in mean.iter_mut().zip(row) {
            *a += v.to_f64();
        }
    }
    mean.iter_mut().for_each(|a| *a /= m as f64);
    let mut var = vec![0.0_f64; c];
    for row in xs.chunks(c) {
        for ((a, &v), &mu) in var.iter_mut().zip(row).zip(&mean) {
            let d = v.to_f64() - mu;
            *a += d * d;
        }
    }
    var.iter_mut().for_each(|a| *a /= m as f64);
    let inv_std: Vec<f64> = var
        .iter()
        .map(|&v| 1.0 / libm::sqrt(v + BN_EPSILON))
        .collect();
    let mut normalized = Tensor::zeros(x.shape());
    let mut out = Tensor::zeros(x.shape());
    let (g, b) = (gamma.data(), beta.data());
    for ((row, nrow), orow) in xs
        .chunks(c)
        .zip(normalized.data_mut().chunks_mut(c))
        .zip(out.data_mut().chunks_mut(c))
    {
        for ch in 0..c {
            let xh = (row[ch].to_f64() - mean[ch]) * inv_std[ch];
            nrow[ch] = T::from_f64(xh);
            orow[ch] = T::from_f64(g[ch].to_f64() * xh + b[ch].to_f64());
        }
    }
    Ok((
        out,
        BatchNormCache {
            normalized,
            inv_std,
            mean,
            var,
        },
    ))
}

pub fn batchnorm_forward_infer<T: Real>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    running_mean: &Tensor<T>,
    running_var: &Tensor<T>,
) -> Result<Tensor<T>, NnError> {
    let (_, _, _, c) = x.dims4("batchnorm")?;
    check_channel_params("batchnorm", c, &[gamma, beta, running_mean, running_var])?;
    let scale: Vec<f64> = gamma
        .data()
        .iter()
        .zip(running_var.data())
        .map(|(&g, &v)| g.to_f64() / libm::sqrt(v.to_f64() + BN_EPSILON))
        .collect();
    let shift: Vec<f64> = beta
        .data()
        .iter()
        .zip(running_mean.data())
        .zip(&scale)
        .map(|((&b, &m), &s)| b.to_f64() - m.to_f64() * s)
        .collect();
    let mut out = Tensor::zeros(x.shape());
    for (row, orow) in x.data().chunks(c).zip(out.data_mut().chunks_mut(c)) {
        for ch in 0..c {
            orow[ch] = T::from_f64(row[ch].to_f64() * scale[ch] + shift[ch]);
        }
    }
    Ok(out)
}

/// Exponential moving update of the running statistics from one batch.
pub fn batchnorm_update_running<T: Real>(
    running_mean: &mut Tensor<T>,
    running_var: &mut Tensor<T>,
    cache: &BatchNormCache<T>,
) {
    for (r, &m) in running_mean.data_mut().iter_mut().zip(&cache.mean) {
        *r = T::from_f64(BN_MOMENTUM * r.to_f64() + (1.0 - BN_MOMENTUM) * m);
    }
    for (r, &v) in running_var.data_mut().iter_mut().zip(&cache.var) {
        *r = T::from_f64(BN_MOMENTUM * r.to_f64() + (1.0 - BN_MOMENTUM) * v);
    }
}

pub struct BatchNormGrads<T> {
    pub input: Tensor<T>,
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
}

pub fn batchnorm_backward<T: Real>(
    cache: &BatchNormCache<T>,
    gamma: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<BatchNormGrads<T>, NnError> {
    let (n, h, w, c) = grad_out.dims4("batchnorm_backward")?;
    if cache.normalized.shape() != grad_out.shape() {
        return Err(shape_err(
            "batchnorm_backward",
            format!("cache {:?}", cache.normalized.shape()),
        ));
    }
    let m = (n * h * w) as f64;
    let xh = cache.normalized.data();
    let gy = grad_out.data();
    let mut sum_g = vec![0.0_f64; c];
    let mut sum_gx = vec![0.0_f64; c];
    for (grow, xrow) in gy.chunks(c).zip(xh.chunks(c)) {
        for ch in 0..c {
            let g = grow[ch].to_f64();
            sum_g[ch] += g;
            sum_gx[ch] += g * xrow[ch].to_f64();
        }
    }
    let gam = gamma.data();
    let mut grad_x = Tensor::zeros(grad_out.shape());
    for ((grow, xrow), orow) in gy
        .chunks(c)
        .zip(xh.chunks(c))
        .zip(grad_x.data_mut().chunks_mut(c))
    {
        for ch in 0..c {
            let k = gam[ch].to_f64() * cache.inv_std[ch] / m;
            let v = k * (m * grow[ch].to_f64() - sum_g[ch] - xrow[ch].to_f64() * sum_gx[ch]);
            orow[ch] = T::from_f64(v);
        }
    }
    Ok(BatchNormGrads {
        input: grad_x,
        gamma: Tensor::from_vec(&[c], sum_gx.into_iter().map(T::from_f64).collect())?,
        beta: Tensor::from_vec(&[c], sum_g.into_iter().map(T::from_f64).collect())?,
    })
}

/// Elementwise `max(0, x)`; the mask is `x > 0`, so the subgradient at 0 is 0.
pub fn relu_forward<T: Real>(x: &Tensor<T>) -> (Tensor<T>, Vec<bool>) {
    let mask: Vec<bool> = x.data().iter().map(|&v| v > T::zero()).collect();
    let out = x.map(|v| if v > T::zero() { v } else { T::zero() });
    (out, mask)
}

pub fn relu_backward<T: Real>(mask: &[bool], grad_out: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    if mask.len() != grad_out.len() {
        return Err(shape_err(
            "relu_backward",
            format!("mask has {} entries", mask.len()),
        ));
    }
    let mut g = grad_out.clone();
    for (v, &keep) in g.data_mut().iter_mut().zip(mask) {
        if !keep {
            *v = T::zero();
        }
    }
    Ok(g)
}

/// Channel-axis concatenation `[a, b]`.
pub fn concat_channels<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>, NnError> {
    let (n, h, w, ca) = a.dims4("concat")?;
    let (nb, hb, wb, cb) = b.dims4("concat")?;
    if (n, h, w) != (nb, hb, wb) {
        return Err(shape_err(
            "concat",
            format!("{:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    let c = ca + cb;
    let mut out = Tensor::zeros(&[n, h, w, c]);
    for ((orow, arow), brow) in out
        .data_mut()
        .chunks_mut(c)
        .zip(a.data().chunks(ca))
        .zip(b.data().chunks(cb))
    {
        orow[..ca].copy_from_slice(arow);
        orow[ca..].copy_from_slice(brow);
    }
    Ok(out)
}

/// Inverse of [`concat_channels`] on gradients: the first `ca` channels and the rest.
pub fn split_channels<T: Real>(
    g: &Tensor<T>,
    ca: usize,
) -> Result<(Tensor<T>, Tensor<T>), NnError> {
    let (n, h, w, c) = g.dims4("split")?;
    if ca == 0 || ca >= c {
        return Err(shape_err(
            "split",
            format!("cannot split {c} channels at {ca}"),
        ));
    }
    let cb = c - ca;
    let mut a = Tensor::zeros(&[n, h, w, ca]);
    let mut b = Tensor::zeros(&[n, h, w, cb]);
    for ((grow, arow), brow) in g
        .data()
        .chunks(c)
        .zip(a.data_mut().chunks_mut(ca))
        .zip(b.data_mut().chunks_mut(cb))
    {
        arow.copy_from_slice(&grow[..ca]);
        brow.copy_from_slice(&grow[ca..]);
    }
    Ok((a, b))
}

/// Mean squared error over every element and its gradient `2 (pred - target) / count`.
pub fn mse_loss<T: Real>(
    pred: &Tensor<T>,
    target: &Tensor<T>,
) -> Result<(f64, Tensor<T>), NnError> {
    if pred.shape() != target.shape() {
        return Err(shape_err(
            "mse",
            format!("{:?} vs {:?}", pred.shape(), target.shape()),
        ));
    }
    let count = pred.len() as f64;
    let mut sum = 0.0_f64;
    let mut grad = Tensor::zeros(pred.shape());
    for ((g, &p), &t) in grad
        .data_mut()
        .iter_mut()
        .zip(pred.data())
        .zip(target.data())
    {
        let d = p.to_f64() - t.to_f64();
        sum += d * d;
        *g = T::from_f64(2.0 * d / count);
    }
    Ok((sum / count, grad))
}
