//! Forward kernels and vector-Jacobian products for every graph operator.
//!
//! All kernels are plain sequential loops with a fixed iteration order, so
//! repeated evaluation of the same graph is bitwise reproducible.

use crate::{Error, Result, Tensor};

/// Spatial padding for `conv2d` (stride is always 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// No padding; output side = input side − kernel + 1.
    Valid,
    /// Zero padding keeping output side = input side (odd kernels only).
    Same,
}

fn shape_err(detail: String) -> Error {
    Error::ShapeMismatch { node: None, detail }
}

// ---- matmul ----------------------------------------------------------------

/// `a` is [m, k]; `b` is [k, n], or [n, k] when `transpose_b`.
pub fn matmul(a: &Tensor, b: &Tensor, transpose_b: bool) -> Result<Tensor> {
    let (ash, bsh) = (a.shape(), b.shape());
    if ash.len() != 2 || bsh.len() != 2 {
        return Err(shape_err(format!(
            "matmul expects rank-2 operands, got {ash:?} and {bsh:?}"
        )));
    }
    let (m, k) = (ash[0], ash[1]);
    let (n, bk) = if transpose_b {
        (bsh[0], bsh[1])
    } else {
        (bsh[1], bsh[0])
    };
    if bk != k {
        return Err(shape_err(format!(
            "matmul inner dimensions disagree: {ash:?} x {bsh:?} (transpose_b={transpose_b})"
        )));
    }
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0;
            if transpose_b {
                for l in 0..k {
                    acc += ad[i * k + l] * bd[j * k + l];
                }
            } else {
                for l in 0..k {
                    acc += ad[i * k + l] * bd[l * n + j];
                }
            }
            out[i * n + j] = acc;
        }
    }
    Tensor::new(&[m, n], out)
}

pub fn matmul_vjp(
    a: &Tensor,
    b: &Tensor,
    transpose_b: bool,
    upstream: &Tensor,
) -> Result<(Tensor, Tensor)> {
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let n = if transpose_b { b.shape()[0] } else { b.shape()[1] };
    let (ad, bd, ud) = (a.data(), b.data(), upstream.data());
    let mut da = vec![0.0; m * k];
    let mut db = vec![0.0; b.numel()];
    if transpose_b {
        // out = a · bᵀ: da = up · b, db = upᵀ · a
        for i in 0..m {
            for l in 0..k {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += ud[i * n + j] * bd[j * k + l];
                }
                da[i * k + l] = acc;
            }
        }
        for j in 0..n {
            for l in 0..k {
                let mut acc = 0.0;
                for i in 0..m {
                    acc += ud[i * n + j] * ad[i * k + l];
                }
                db[j * k + l] = acc;
            }
        }
    } else {
        // out = a · b: da = up · bᵀ, db = aᵀ · up
        for i in 0..m {
            for l in 0..k {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += ud[i * n + j] * bd[l * n + j];
                }
                da[i * k + l] = acc;
            }
        }
        for l in 0..k {
            for j in 0..n {
                let mut acc = 0.0;
                for i in 0..m {
                    acc += ad[i * k + l] * ud[i * n + j];
                }
                db[l * n + j] = acc;
            }
        }
    }
    Ok((Tensor::new(&[m, k], da)?, Tensor::new(b.shape(), db)?))
}

// ---- conv2d ----------------------------------------------------------------

/// Output spatial side for stride-1 convolution.
pub fn conv2d_out_side(input: usize, kernel: usize, padding: Padding) -> Result<usize> {
    match padding {
        Padding::Valid => {
            if input < kernel {
                Err(shape_err(format!(
                    "conv2d valid padding needs input {input} >= kernel {kernel}"
                )))
            } else {
                Ok(input - kernel + 1)
            }
        }
        Padding::Same => {
            if kernel % 2 == 0 {
                Err(shape_err(format!(
                    "conv2d same padding requires an odd kernel, got {kernel}"
                )))
            } else {
                Ok(input)
            }
        }
    }
}

/// `x` is [B, Cin, H, W]; `w` is [Cout, Cin, kh, kw] with kh == kw.
pub fn conv2d(x: &Tensor, w: &Tensor, padding: Padding) -> Result<Tensor> {
    let (xs, ws) = (x.shape(), w.shape());
    if xs.len() != 4 || ws.len() != 4 {
        return Err(shape_err(format!(
            "conv2d expects rank-4 operands, got {xs:?} and {ws:?}"
        )));
    }
    if ws[2] != ws[3] {
        return Err(shape_err(format!("conv2d kernels must be square, got {ws:?}")));
    }
    if xs[1] != ws[1] {
        return Err(shape_err(format!(
            "conv2d channel mismatch: input {xs:?} vs weights {ws:?}"
        )));
    }
    let (batch, cin, h, wd) = (xs[0], xs[1], xs[2], xs[3]);
    let (cout, k) = (ws[0], ws[2]);
    let oh = conv2d_out_side(h, k, padding)?;
    let ow = conv2d_out_side(wd, k, padding)?;
    let pad = match padding {
        Padding::Valid => 0isize,
        Padding::Same => (k as isize - 1) / 2,
    };
    let (xd, wdat) = (x.data(), w.data());
    let mut out = vec![0.0; batch * cout * oh * ow];
    for b in 0..batch {
        for oc in 0..cout {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0;
                    for ic in 0..cin {
                        let xbase = ((b * cin + ic) * h) as isize;
                        let wbase = ((oc * cin + ic) * k) * k;
                        for ky in 0..k {
                            let iy = oy as isize + ky as isize - pad;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let xrow = ((xbase + iy) as usize) * wd;
                            for kx in 0..k {
                                let ix = ox as isize + kx as isize - pad;
                                if ix < 0 || ix >= wd as isize {
                                    continue;
                                }
                                acc += xd[xrow + ix as usize] * wdat[wbase + ky * k + kx];
                            }
                        }
                    }
                    out[((b * cout + oc) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    Tensor::new(&[batch, cout, oh, ow], out)
}

pub fn conv2d_vjp(
    x: &Tensor,
    w: &Tensor,
    padding: Padding,
    upstream: &Tensor,
) -> Result<(Tensor, Tensor)> {
    let (xs, ws) = (x.shape(), w.shape());
    let (batch, cin, h, wd) = (xs[0], xs[1], xs[2], xs[3]);
    let (cout, k) = (ws[0], ws[2]);
    let us = upstream.shape();
    let (oh, ow) = (us[2], us[3]);
    let pad = match padding {
        Padding::Valid => 0isize,
        Padding::Same => (k as isize - 1) / 2,
    };
    let (xd, wdat, ud) = (x.data(), w.data(), upstream.data());
    let mut dx = vec![0.0; x.numel()];
    let mut dw = vec![0.0; w.numel()];
    for b in 0..batch {
        for oc in 0..cout {
            for oy in 0..oh {
                for ox in 0..ow {
                    let u = ud[((b * cout + oc) * oh + oy) * ow + ox];
                    if u == 0.0 {
                        continue;
                    }
                    for ic in 0..cin {
                        let xbase = ((b * cin + ic) * h) as isize;
                        let wbase = ((oc * cin + ic) * k) * k;
                        for ky in 0..k {
                            let iy = oy as isize + ky as isize - pad;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let xrow = ((xbase + iy) as usize) * wd;
                            for kx in 0..k {
                                let ix = ox as isize + kx as isize - pad;
                                if ix < 0 || ix >= wd as isize {
                                    continue;
                                }
                                let xi = xrow + ix as usize;
                                let wi = wbase + ky * k + kx;
                                dw[wi] += u * xd[xi];
                                dx[xi] += u * wdat[wi];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((Tensor::new(xs, dx)?, Tensor::new(ws, dw)?))
}

// ---- maxpool 2x2 stride 2 --------------------------------------------------

pub fn maxpool2(x: &Tensor) -> Result<Tensor> {
    let xs = x.shape();
    if xs.len() != 4 {
        return Err(shape_err(format!("maxpool2 expects rank-4 input, got {xs:?}")));
    }
    let (batch, c, h, w) = (xs[0], xs[1], xs[2], xs[3]);
    let (oh, ow) = (h / 2, w / 2);
    if oh == 0 || ow == 0 {
        return Err(shape_err(format!("maxpool2 input {xs:?} too small")));
    }
    let xd = x.data();
    let mut out = vec![0.0; batch * c * oh * ow];
    for bc in 0..batch * c {
        let base = bc * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let (iy, ix) = (oy * 2, ox * 2);
                let mut best = xd[base + iy * w + ix];
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let v = xd[base + (iy + dy) * w + (ix + dx)];
                    if v > best {
                        best = v;
                    }
                }
                out[(bc * oh + oy) * ow + ox] = best;
            }
        }
    }
    Tensor::new(&[batch, c, oh, ow], out)
}

/// Routes the upstream gradient to the first maximum in each 2x2 window
/// (row-major scan), which makes tie handling deterministic.
pub fn maxpool2_vjp(x: &Tensor, upstream: &Tensor) -> Result<Tensor> {
    let xs = x.shape();
    let (batch, c, h, w) = (xs[0], xs[1], xs[2], xs[3]);
    let (oh, ow) = (h / 2, w / 2);
    let (xd, ud) = (x.data(), upstream.data());
    let mut dx = vec![0.0; x.numel()];
    for bc in 0..batch * c {
        let base = bc * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let (iy, ix) = (oy * 2, ox * 2);
                let mut best_idx = base + iy * w + ix;
                let mut best = xd[best_idx];
                for (dy, dx2) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (iy + dy) * w + (ix + dx2);
                    if xd[idx] > best {
                        best = xd[idx];
                        best_idx = idx;
                    }
                }
                dx[best_idx] += ud[(bc * oh + oy) * ow + ox];
            }
        }
    }
    Tensor::new(xs, dx)
}

// ---- bias add --------------------------------------------------------------

/// Adds `bias[c]` across axis 1 of `x` ([B, C] or [B, C, H, W]).
pub fn bias_add(x: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let xs = x.shape();
    if xs.len() < 2 || bias.shape().len() != 1 || bias.shape()[0] != xs[1] {
        return Err(shape_err(format!(
            "bias_add expects bias [{}] for input {:?}, got {:?}",
            xs.get(1).copied().unwrap_or(0),
            xs,
            bias.shape()
        )));
    }
    let c = xs[1];
    let inner: usize = xs[2..].iter().product();
    let (xd, bd) = (x.data(), bias.data());
    let mut out = xd.to_vec();
    for b in 0..xs[0] {
        for ch in 0..c {
            let base = (b * c + ch) * inner;
            for i in 0..inner {
                out[base + i] += bd[ch];
            }
        }
    }
    Tensor::new(xs, out)
}

pub fn bias_add_vjp(x: &Tensor, upstream: &Tensor) -> Result<(Tensor, Tensor)> {
    let xs = x.shape();
    let c = xs[1];
    let inner: usize = xs[2..].iter().product();
    let ud = upstream.data();
    let mut db = vec![0.0; c];
    for b in 0..xs[0] {
        for ch in 0..c {
            let base = (b * c + ch) * inner;
            for i in 0..inner {
                db[ch] += ud[base + i];
            }
        }
    }
    Ok((upstream.clone(), Tensor::new(&[c], db)?))
}

// ---- elementwise -----------------------------------------------------------

pub fn tanh(x: &Tensor) -> Tensor {
    let data = x.data().iter().map(|v| v.tanh()).collect();
    Tensor::new(x.shape(), data).expect("same shape")
}

pub fn tanh_vjp(output: &Tensor, upstream: &Tensor) -> Tensor {
    let data = output
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(y, u)| u * (1.0 - y * y))
        .collect();
    Tensor::new(output.shape(), data).expect("same shape")
}

pub fn relu(x: &Tensor) -> Tensor {
    let data = x.data().iter().map(|v| v.max(0.0)).collect();
    Tensor::new(x.shape(), data).expect("same shape")
}

/// Subgradient at 0 is taken as 0.
pub fn relu_vjp(x: &Tensor, upstream: &Tensor) -> Tensor {
    let data = x
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(v, u)| if *v > 0.0 { *u } else { 0.0 })
        .collect();
    Tensor::new(x.shape(), data).expect("same shape")
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(shape_err(format!(
            "add expects equal shapes, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Tensor::new(a.shape(), data)
}

pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() != b.shape() {
        return Err(shape_err(format!(
            "mul expects equal shapes, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    Tensor::new(a.shape(), data)
}

pub fn scale(x: &Tensor, factor: f64) -> Tensor {
    let data = x.data().iter().map(|v| v * factor).collect();
    Tensor::new(x.shape(), data).expect("same shape")
}

pub fn sum(x: &Tensor) -> Tensor {
    Tensor::scalar(x.data().iter().sum())
}

// ---- softmax cross-entropy -------------------------------------------------

/// Checks that `labels` holds integers in `[0, classes)`.
pub fn validate_labels(labels: &Tensor, classes: usize) -> Result<()> {
    for (i, &v) in labels.data().iter().enumerate() {
        if v.fract() != 0.0 || v < 0.0 || v >= classes as f64 {
            return Err(Error::InvalidLabel {
                index: i,
                value: v,
                classes,
            });
        }
    }
    Ok(())
}

/// Mean of `-log softmax(logits)[label]` over the batch, computed with the
/// log-sum-exp trick. `logits` is [B, C]; `labels` is [B].
pub fn softmax_cross_entropy(logits: &Tensor, labels: &Tensor) -> Result<Tensor> {
    let ls = logits.shape();
    if ls.len() != 2 || labels.shape().len() != 1 || labels.shape()[0] != ls[0] {
        return Err(shape_err(format!(
            "softmax_cross_entropy expects logits [B, C] and labels [B], got {:?} and {:?}",
            ls,
            labels.shape()
        )));
    }
    if ls[0] == 0 {
        return Err(shape_err("softmax_cross_entropy on an empty batch".into()));
    }
    let (bsz, c) = (ls[0], ls[1]);
    validate_labels(labels, c)?;
    let (ld, lab) = (logits.data(), labels.data());
    let mut total = 0.0;
    for b in 0..bsz {
        let row = &ld[b * c..(b + 1) * c];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += lse - row[lab[b] as usize];
    }
    Ok(Tensor::scalar(total / bsz as f64))
}

/// dLoss/dlogits = upstream · (softmax − onehot) / B.
pub fn softmax_cross_entropy_vjp(
    logits: &Tensor,
    labels: &Tensor,
    upstream: &Tensor,
) -> Result<Tensor> {
    let (bsz, c) = (logits.shape()[0], logits.shape()[1]);
    let u = upstream.scalar_value()?;
    let (ld, lab) = (logits.data(), labels.data());
    let mut dl = vec![0.0; bsz * c];
    let inv_b = u / bsz as f64;
    for b in 0..bsz {
        let row = &ld[b * c..(b + 1) * c];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = row.iter().map(|v| (v - m).exp()).sum();
        for j in 0..c {
            let p = (row[j] - m).exp() / denom;
            dl[b * c + j] = p * inv_b;
        }
        dl[b * c + lab[b] as usize] -= inv_b;
    }
    Tensor::new(logits.shape(), dl)
}

/// Softmax over the last axis of a [B, C] tensor; used by evaluation code.
pub fn softmax_rows(logits: &Tensor) -> Result<Tensor> {
    let ls = logits.shape();
    if ls.len() != 2 {
        return Err(shape_err(format!("softmax_rows expects [B, C], got {ls:?}")));
    }
    let (bsz, c) = (ls[0], ls[1]);
    let ld = logits.data();
    let mut out = vec![0.0; bsz * c];
    for b in 0..bsz {
        let row = &ld[b * c..(b + 1) * c];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = row.iter().map(|v| (v - m).exp()).sum();
        for j in 0..c {
            out[b * c + j] = (row[j] - m).exp() / denom;
        }
    }
    Tensor::new(ls, out)
}

/// Argmax per row with ties broken toward the lowest index.
pub fn argmax_rows(logits: &Tensor) -> Result<Vec<usize>> {
    let ls = logits.shape();
    if ls.len() != 2 {
        return Err(shape_err(format!("argmax_rows expects [B, C], got {ls:?}")));
    }
    let (bsz, c) = (ls[0], ls[1]);
    let ld = logits.data();
    let mut out = Vec::with_capacity(bsz);
    for b in 0..bsz {
        let row = &ld[b * c..(b + 1) * c];
        let mut best = 0;
        for j in 1..c {
            if row[j] > row[best] {
                best = j;
            }
        }
        out.push(best);
    }
    Ok(out)
}
