//! Forward/backward kernels. Conventions fixed once here: 3x3 kernels with
//! zero padding 1 and stride 1, group-norm epsilon 1e-5, leaky slope 0.01,
//! max-pool 2x2 stride 2 routing gradient to the first tie.

use super::Tensor;
use crate::error::{Error, Result};

pub const GN_EPS: f64 = 1e-5;
pub const LEAKY_SLOPE: f64 = 0.01;

/// Cross-correlation of `input` [C_in,H,W] with `kernels` [C_out,C_in,3,3].
pub fn conv2d(input: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (c_in, h, w) = dims3(input)?;
    if kernels.shape.len() != 4 || kernels.shape[1] != c_in || kernels.shape[2] != 3 || kernels.shape[3] != 3 {
        return Err(Error::Domain(format!(
            "conv2d kernel shape {:?} incompatible with input channels {}",
            kernels.shape, c_in
        )));
    }
    let c_out = kernels.shape[0];
    if bias.len() != c_out {
        return Err(Error::Domain("conv2d bias length mismatch".into()));
    }
    let mut out = Tensor::zeros(&[c_out, h, w]);
    for co in 0..c_out {
        for ci in 0..c_in {
            let kbase = (co * c_in + ci) * 9;
            let ibase = ci * h * w;
            for oy in 0..h {
                for ox in 0..w {
                    let mut acc = 0.0;
                    for ky in 0..3usize {
                        let iy = oy as isize + ky as isize - 1;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..3usize {
                            let ix = ox as isize + kx as isize - 1;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            acc += kernels.data[kbase + ky * 3 + kx]
                                * input.data[ibase + iy as usize * w + ix as usize];
                        }
                    }
                    out.data[(co * h + oy) * w + ox] += acc;
                }
            }
        }
        let obase = co * h * w;
        for i in 0..h * w {
            out.data[obase + i] += bias.data[co];
        }
    }
    Ok(out)
}

/// Gradients of conv2d w.r.t. input, kernels, and bias.
pub fn conv2d_backward(
    input: &Tensor,
    kernels: &Tensor,
    grad_out: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let (c_in, h, w) = (input.shape[0], input.shape[1], input.shape[2]);
    let c_out = kernels.shape[0];
    let mut g_in = Tensor::zeros(&input.shape);
    let mut g_k = Tensor::zeros(&kernels.shape);
    let mut g_b = Tensor::zeros(&[c_out]);
    for co in 0..c_out {
        let obase = co * h * w;
        g_b.data[co] = grad_out.data[obase..obase + h * w].iter().sum();
        for ci in 0..c_in {
            let kbase = (co * c_in + ci) * 9;
            let ibase = ci * h * w;
            for oy in 0..h {
                for ox in 0..w {
                    let go = grad_out.data[obase + oy * w + ox];
                    if go == 0.0 {
                        continue;
                    }
                    for ky in 0..3usize {
                        let iy = oy as isize + ky as isize - 1;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..3usize {
                            let ix = ox as isize + kx as isize - 1;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let ii = ibase + iy as usize * w + ix as usize;
                            g_k.data[kbase + ky * 3 + kx] += go * input.data[ii];
                            g_in.data[ii] += go * kernels.data[kbase + ky * 3 + kx];
                        }
                    }
                }
            }
        }
    }
    (g_in, g_k, g_b)
}

/// Per-group statistics retained for the backward pass.
pub struct GroupNormCache {
    pub xhat: Tensor,
    pub inv_std: Vec<f64>,
    pub groups: usize,
}

/// Group normalization over [C,H,W] followed by per-channel affine.
pub fn group_norm(
    input: &Tensor,
    groups: usize,
    gamma: &Tensor,
    beta: &Tensor,
) -> Result<(Tensor, GroupNormCache)> {
    let (c, h, w) = dims3(input)?;
    if c % groups != 0 {
        return Err(Error::Config(format!(
            "group_norm: {} channels not divisible by {} groups",
            c, groups
        )));
    }
    if gamma.len() != c || beta.len() != c {
        return Err(Error::Domain("group_norm affine length mismatch".into()));
    }
    let cpg = c / groups;
    let gsize = cpg * h * w;
    let mut out = Tensor::zeros(&input.shape);
    let mut xhat = Tensor::zeros(&input.shape);
    let mut inv_std = vec![0.0; groups];
    for g in 0..groups {
        let base = g * gsize;
        let slice = &input.data[base..base + gsize];
        let mean = slice.iter().sum::<f64>() / gsize as f64;
        let var = slice.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / gsize as f64;
        let istd = 1.0 / (var + GN_EPS).sqrt();
        inv_std[g] = istd;
        for ci in 0..cpg {
            let ch = g * cpg + ci;
            for i in 0..h * w {
                let idx = ch * h * w + i;
                let xh = (input.data[idx] - mean) * istd;
                xhat.data[idx] = xh;
                out.data[idx] = gamma.data[ch] * xh + beta.data[ch];
            }
        }
    }
    Ok((
        out,
        GroupNormCache {
            xhat,
            inv_std,
            groups,
        },
    ))
}

/// Gradients of group_norm w.r.t. input, gamma, and beta.
pub fn group_norm_backward(
    cache: &GroupNormCache,
    gamma: &Tensor,
    grad_out: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let shape = &cache.xhat.shape;
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    let groups = cache.groups;
    let cpg = c / groups;
    let gsize = cpg * h * w;
    let mut g_in = Tensor::zeros(shape);
    let mut g_gamma = Tensor::zeros(&[c]);
    let mut g_beta = Tensor::zeros(&[c]);
    for ch in 0..c {
        for i in 0..h * w {
            let idx = ch * h * w + i;
            g_beta.data[ch] += grad_out.data[idx];
            g_gamma.data[ch] += grad_out.data[idx] * cache.xhat.data[idx];
        }
    }
    for g in 0..groups {
        // dxhat and its group means
        let mut sum_dxhat = 0.0;
        let mut sum_dxhat_xhat = 0.0;
        for ci in 0..cpg {
            let ch = g * cpg + ci;
            for i in 0..h * w {
                let idx = ch * h * w + i;
                let dxh = grad_out.data[idx] * gamma.data[ch];
                sum_dxhat += dxh;
                sum_dxhat_xhat += dxh * cache.xhat.data[idx];
            }
        }
        let m = gsize as f64;
        let mean_dxhat = sum_dxhat / m;
        let mean_dxhat_xhat = sum_dxhat_xhat / m;
        for ci in 0..cpg {
            let ch = g * cpg + ci;
            for i in 0..h * w {
                let idx = ch * h * w + i;
                let dxh = grad_out.data[idx] * gamma.data[ch];
                g_in.data[idx] = cache.inv_std[g]
                    * (dxh - mean_dxhat - cache.xhat.data[idx] * mean_dxhat_xhat);
            }
        }
    }
    (g_in, g_gamma, g_beta)
}

pub fn leaky_relu(input: &Tensor, slope: f64) -> Tensor {
    let data = input
        .data
        .iter()
        .map(|&v| if v >= 0.0 { v } else { slope * v })
        .collect();
    Tensor {
        shape: input.shape.clone(),
        data,
    }
}

/// Gradient routes slope on the negative side; exactly 0 takes the
/// positive branch in forward but the negative slope here, matching the
/// declared convention.
pub fn leaky_relu_backward(input: &Tensor, slope: f64, grad_out: &Tensor) -> Tensor {
    let data = input
        .data
        .iter()
        .zip(&grad_out.data)
        .map(|(&x, &g)| if x > 0.0 { g } else { slope * g })
        .collect();
    Tensor {
        shape: input.shape.clone(),
        data,
    }
}

/// Flat indices of each window's argmax (first occurrence on ties).
pub struct PoolCache {
    pub argmax: Vec<usize>,
    pub in_shape: Vec<usize>,
}

/// 2x2 max pooling with stride 2 over [C,H,W]; H and W must be even.
pub fn max_pool2(input: &Tensor) -> Result<(Tensor, PoolCache)> {
    let (c, h, w) = dims3(input)?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Domain(format!(
            "max_pool2 requires even dims, got {}x{}",
            h, w
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[c, oh, ow]);
    let mut argmax = vec![0usize; c * oh * ow];
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0usize;
                for dy in 0..2 {
                    for dx in 0..2 {
                        let idx = (ch * h + 2 * oy + dy) * w + 2 * ox + dx;
                        if input.data[idx] > best {
                            best = input.data[idx];
                            best_idx = idx;
                        }
                    }
                }
                let oi = (ch * oh + oy) * ow + ox;
                out.data[oi] = best;
                argmax[oi] = best_idx;
            }
        }
    }
    Ok((
        out,
        PoolCache {
            argmax,
            in_shape: input.shape.clone(),
        },
    ))
}

pub fn max_pool2_backward(cache: &PoolCache, grad_out: &Tensor) -> Tensor {
    let mut g_in = Tensor::zeros(&cache.in_shape);
    for (oi, &ii) in cache.argmax.iter().enumerate() {
        g_in.data[ii] += grad_out.data[oi];
    }
    g_in
}

/// Affine map W.x + b with `weight` [M,N] and `input` [N].
pub fn dense(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    if weight.shape.len() != 2 || weight.shape[1] != input.len() || bias.len() != weight.shape[0] {
        return Err(Error::Domain(format!(
            "dense shape mismatch: weight {:?}, input {}, bias {}",
            weight.shape,
            input.len(),
            bias.len()
        )));
    }
    let (m, n) = (weight.shape[0], weight.shape[1]);
    let mut out = Tensor::zeros(&[m]);
    for r in 0..m {
        let base = r * n;
        let mut acc = bias.data[r];
        for cidx in 0..n {
            acc += weight.data[base + cidx] * input.data[cidx];
        }
        out.data[r] = acc;
    }
    Ok(out)
}

pub fn dense_backward(
    input: &Tensor,
    weight: &Tensor,
    grad_out: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let (m, n) = (weight.shape[0], weight.shape[1]);
    let mut g_in = Tensor::zeros(&input.shape);
    let mut g_w = Tensor::zeros(&weight.shape);
    let g_b = grad_out.clone();
    for r in 0..m {
        let go = grad_out.data[r];
        let base = r * n;
        if go == 0.0 {
            continue;
        }
        for cidx in 0..n {
            g_w.data[base + cidx] = go * input.data[cidx];
            g_in.data[cidx] += go * weight.data[base + cidx];
        }
    }
    (g_in, g_w, g_b)
}

/// Max-subtracted softmax; output sums to 1 and is shift-invariant bitwise.
pub fn softmax(logits: &Tensor) -> Tensor {
    let max = logits.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.data.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Tensor {
        shape: logits.shape.clone(),
        data: exps.iter().map(|&e| e / sum).collect(),
    }
}

fn dims3(t: &Tensor) -> Result<(usize, usize, usize)> {
    if t.shape.len() != 3 {
        return Err(Error::Domain(format!(
            "expected rank-3 tensor, got shape {:?}",
            t.shape
        )));
    }
    Ok((t.shape[0], t.shape[1], t.shape[2]))
}
