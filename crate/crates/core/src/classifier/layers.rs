//! Kernels for one sample at a time. Feature maps are channel-major
//! `(c, h, w)` flat buffers.

use super::scalar::Scalar;

#[inline]
fn pad_before(kernel: usize) -> usize {
    (kernel - 1) / 2
}

/// Unfolds a zero-padded ("same") `k x k` neighborhood around every pixel
/// into a `(c*k*k) x (h*w)` matrix.
pub fn im2col<T: Scalar>(input: &[T], c: usize, h: usize, w: usize, k: usize, cols: &mut [T]) {
    let hw = h * w;
    let pb = pad_before(k) as isize;
    debug_assert_eq!(cols.len(), c * k * k * hw);
    for ci in 0..c {
        let plane = &input[ci * hw..(ci + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ci * k + ky) * k + kx) * hw;
                let dst = &mut cols[row..row + hw];
                let dx = kx as isize - pb;
                let x_lo = (-dx).max(0) as usize;
                let x_hi = (w as isize - dx).clamp(0, w as isize) as usize;
                for y in 0..h {
                    let sy = y as isize + ky as isize - pb;
                    let out = &mut dst[y * w..(y + 1) * w];
                    if sy < 0 || sy >= h as isize || x_lo >= x_hi {
                        out.fill(T::zero());
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    out[..x_lo].fill(T::zero());
                    out[x_hi..].fill(T::zero());
                    let s0 = (x_lo as isize + dx) as usize;
                    out[x_lo..x_hi].copy_from_slice(&src[s0..s0 + (x_hi - x_lo)]);
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates column gradients back onto the input.
pub fn col2im<T: Scalar>(cols: &[T], c: usize, h: usize, w: usize, k: usize, grad: &mut [T]) {
    let hw = h * w;
    let pb = pad_before(k) as isize;
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ci * k + ky) * k + kx) * hw;
                let src = &cols[row..row + hw];
                let dx = kx as isize - pb;
                let x_lo = (-dx).max(0) as usize;
                let x_hi = (w as isize - dx).clamp(0, w as isize) as usize;
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..h {
                    let sy = y as isize + ky as isize - pb;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let base = ci * hw + sy as usize * w;
                    let s0 = (x_lo as isize + dx) as usize;
                    let dst = &mut grad[base + s0..base + s0 + (x_hi - x_lo)];
                    for (d, &g) in dst.iter_mut().zip(&src[y * w + x_lo..y * w + x_hi]) {
                        *d += g;
                    }
                }
            }
        }
    }
}

/// `out = weight * cols + bias`, `weight` is `filters x (c*k*k)`.
pub fn conv_forward<T: Scalar>(
    weight: &[T],
    bias: &[T],
    cols: &[T],
    filters: usize,
    patch: usize,
    hw: usize,
    out: &mut [T],
) {
    for (f, plane) in out.chunks_exact_mut(hw).enumerate() {
        plane.fill(bias[f]);
    }
    T::gemm(filters, patch, hw, T::one(), weight, patch as isize, 1, cols, hw as isize, 1, T::one(), out, hw as isize, 1);
}

/// Accumulates weight and bias gradients and, when asked, writes the
/// column gradient `weight^T * grad_out`.
#[allow(clippy::too_many_arguments)]
pub fn conv_backward<T: Scalar>(
    weight: &[T],
    cols: &[T],
    grad_out: &[T],
    filters: usize,
    patch: usize,
    hw: usize,
    grad_weight: &mut [T],
    grad_bias: &mut [T],
    grad_cols: Option<&mut [T]>,
) {
    for (f, plane) in grad_out.chunks_exact(hw).enumerate() {
        let mut s = T::zero();
        for &g in plane {
            s += g;
        }
        grad_bias[f] += s;
    }
    // dW += dOut (filters x hw) * cols^T (hw x patch)
    T::gemm(filters, hw, patch, T::one(), grad_out, hw as isize, 1, cols, 1, hw as isize, T::one(), grad_weight, patch as isize, 1);
    if let Some(dcols) = grad_cols {
        // dCols = W^T (patch x filters) * dOut (filters x hw)
        T::gemm(patch, filters, hw, T::one(), weight, 1, patch as isize, grad_out, hw as isize, 1, T::zero(), dcols, hw as isize, 1);
    }
}

/// Total and leading padding of a "same" pool along one axis.
fn pool_padding(len: usize, out: usize, size: usize, stride: usize) -> usize {
    let total = ((out - 1) * stride + size).saturating_sub(len);
    total / 2
}

/// "Same"-padded max pool. Padding never wins; ties go to the first
/// element in row-major window order. Returns the pooled map and, per
/// output, the flat input index of its maximum.
pub fn max_pool<T: Scalar>(
    input: &[T],
    c: usize,
    h: usize,
    w: usize,
    size: usize,
    stride: usize,
) -> (Vec<T>, Vec<u32>) {
    let (oh, ow) = (h.div_ceil(stride), w.div_ceil(stride));
    let (py, px) = (pool_padding(h, oh, size, stride), pool_padding(w, ow, size, stride));
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut arg = Vec::with_capacity(c * oh * ow);
    for ci in 0..c {
        let base = ci * h * w;
        for oy in 0..oh {
            let y0 = (oy * stride) as isize - py as isize;
            let ys = y0.max(0) as usize..((y0 + size as isize).min(h as isize)) as usize;
            for ox in 0..ow {
                let x0 = (ox * stride) as isize - px as isize;
                let xs = x0.max(0) as usize..((x0 + size as isize).min(w as isize)) as usize;
                let mut best = usize::MAX;
                let mut best_v = T::neg_infinity();
                for y in ys.clone() {
                    for x in xs.clone() {
                        let i = base + y * w + x;
                        if best == usize::MAX || input[i] > best_v {
                            best = i;
                            best_v = input[i];
                        }
                    }
                }
                out.push(best_v);
                arg.push(best as u32);
            }
        }
    }
    (out, arg)
}

pub fn max_pool_backward<T: Scalar>(grad_out: &[T], argmax: &[u32], grad_in: &mut [T]) {
    for (&g, &i) in grad_out.iter().zip(argmax) {
        grad_in[i as usize] += g;
    }
}

pub fn relu_inplace<T: Scalar>(v: &mut [T]) {
    for x in v {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
}

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let mut sum = T::zero();
    for &e in &exps {
        sum += e;
    }
    exps.into_iter().map(|e| e / sum).collect()
}
